#pragma once

#include <array>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streamgp/common.hpp"

namespace streamgp {

// Fixed three-segment network: segment 1 runs from the outlet (coordinate 0)
// up to the junction u1; segments 2 and 3 start at u1 and are unbounded upstream.
// Coordinates are upstream distances from the outlet.

using SiteId = int;

struct Segment {
    int id;
    double lower;
    double upper;  // +inf for the headwater segments
};

struct SiteRecord {
    std::string name;
    int segment;
    double coord;
    bool inducing;
};

struct SegmentSets {
    std::set<int> downstream;
    std::set<int> upstream;
};

class StreamNetwork {
public:
    // Sampled sites s1,s2,s3 get ids 0,1,2. h = (h1,h2,h3): h1 is the
    // distance from s1 to the junction, h2/h3 from the junction to s2/s3.
    // With inducing offsets hp, s1' = u1 - hp1, s2' = u1 + hp2, s3' = u1 + hp3
    // get ids 3,4,5.
    static StreamNetwork from_edges(const std::array<double, 3>& h,
                                    std::optional<std::array<double, 3>> hp = std::nullopt);

    SiteId add_site(const std::string& name, int segment, double coord, bool inducing = false);

    SiteId find(const std::string& name) const;
    const SiteRecord& site(SiteId id) const;
    const Segment& segment(int id) const;
    std::size_t site_count() const { return sites_.size(); }
    double junction() const { return junction_; }

    SegmentSets sets(SiteId a) const;
    bool flow_connected(SiteId a, SiteId b) const;
    double hydro_distance(SiteId a, SiteId b) const;

    // B_{up,down} for a flow-connected pair (segments strictly above the
    // downstream site's segment up to and including the upstream site's).
    std::set<int> between(SiteId a, SiteId b) const;
    // B_{s,[j]}: segments from s's segment (exclusive) up to segment j (inclusive).
    std::set<int> between_to_segment(SiteId s, int j) const;

    // sqrt_w indexed by segment id (entry 0 unused); product over B.
    double weight_product(SiteId a, SiteId b, const std::array<double, 4>& sqrt_w) const;

private:
    std::set<int> downstream_of_segment(int seg) const;
    void check(SiteId id) const;

    double junction_ = 0.0;
    std::array<Segment, 3> segments_{};
    std::vector<SiteRecord> sites_;
};

}  // namespace streamgp
