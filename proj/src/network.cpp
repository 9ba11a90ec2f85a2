#include "streamgp/network.hpp"

#include <algorithm>
#include <cmath>

namespace streamgp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

StreamNetwork StreamNetwork::from_edges(const std::array<double, 3>& h,
                                        std::optional<std::array<double, 3>> hp) {
    for (int k = 0; k < 3; ++k)
        if (!(h[k] > 0.0) || !std::isfinite(h[k]))
            fail(ErrorKind::Config, "edge distance h" + std::to_string(k + 1) + " missing or non-positive");
    StreamNetwork net;
    net.junction_ = h[0];
    net.segments_ = {Segment{1, 0.0, h[0]}, Segment{2, h[0], kInf}, Segment{3, h[0], kInf}};
    net.add_site("s1", 1, 0.0);
    net.add_site("s2", 2, h[0] + h[1]);
    net.add_site("s3", 3, h[0] + h[2]);
    if (hp) {
        for (int k = 0; k < 3; ++k)
            if (!((*hp)[k] > 0.0) || !std::isfinite((*hp)[k]))
                fail(ErrorKind::Config, "inducing offset must be positive");
        // Inducing sites stay on their own segment (never cross u1).
        if ((*hp)[0] >= h[0]) fail(ErrorKind::Domain, "s1' would not lie above s1");
        net.add_site("s1'", 1, h[0] - (*hp)[0], true);
        net.add_site("s2'", 2, h[0] + (*hp)[1], true);
        net.add_site("s3'", 3, h[0] + (*hp)[2], true);
    }
    return net;
}

SiteId StreamNetwork::add_site(const std::string& name, int segment, double coord, bool inducing) {
    if (segment < 1 || segment > 3) fail(ErrorKind::Config, "unknown segment for site " + name);
    if (!(coord >= 0.0)) fail(ErrorKind::Config, "site coordinate must be nonnegative: " + name);
    const auto& seg = segments_[segment - 1];
    if (segment == 1 && !(coord < junction_))
        fail(ErrorKind::Config, "segment-1 site must lie below the junction: " + name);
    if (segment != 1 && !(coord > seg.lower))
        fail(ErrorKind::Config, "headwater site must lie above the junction: " + name);
    sites_.push_back(SiteRecord{name, segment, coord, inducing});
    return static_cast<SiteId>(sites_.size() - 1);
}

SiteId StreamNetwork::find(const std::string& name) const {
    for (std::size_t i = 0; i < sites_.size(); ++i)
        if (sites_[i].name == name) return static_cast<SiteId>(i);
    fail(ErrorKind::Lookup, "unknown site " + name);
}

void StreamNetwork::check(SiteId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= sites_.size())
        fail(ErrorKind::Lookup, "unknown site id " + std::to_string(id));
}

const SiteRecord& StreamNetwork::site(SiteId id) const {
    check(id);
    return sites_[id];
}

const Segment& StreamNetwork::segment(int id) const {
    if (id < 1 || id > 3) fail(ErrorKind::Lookup, "unknown segment " + std::to_string(id));
    return segments_[id - 1];
}

std::set<int> StreamNetwork::downstream_of_segment(int seg) const {
    if (seg == 1) return {1};
    return {seg, 1};
}

SegmentSets StreamNetwork::sets(SiteId a) const {
    const int seg = site(a).segment;
    SegmentSets s;
    s.downstream = downstream_of_segment(seg);
    if (seg == 1)
        s.upstream = {1, 2, 3};
    else
        s.upstream = {seg};
    return s;
}

bool StreamNetwork::flow_connected(SiteId a, SiteId b) const {
    const auto da = sets(a).downstream;
    const auto db = sets(b).downstream;
    std::set<int> inter;
    std::set_intersection(da.begin(), da.end(), db.begin(), db.end(),
                          std::inserter(inter, inter.begin()));
    const auto& smaller = da.size() <= db.size() ? da : db;
    return inter == smaller;
}

double StreamNetwork::hydro_distance(SiteId a, SiteId b) const {
    const auto& sa = site(a);
    const auto& sb = site(b);
    if (flow_connected(a, b)) return std::abs(sa.coord - sb.coord);
    return (sa.coord - junction_) + (sb.coord - junction_);
}

std::set<int> StreamNetwork::between(SiteId a, SiteId b) const {
    if (!flow_connected(a, b)) fail(ErrorKind::Domain, "between-set requested for unconnected sites");
    const auto da = sets(a).downstream;
    const auto db = sets(b).downstream;
    const auto& up = da.size() >= db.size() ? da : db;
    const auto& down = da.size() >= db.size() ? db : da;
    std::set<int> out;
    std::set_difference(up.begin(), up.end(), down.begin(), down.end(),
                        std::inserter(out, out.begin()));
    return out;
}

std::set<int> StreamNetwork::between_to_segment(SiteId s, int j) const {
    const auto ds = sets(s).downstream;
    const auto dj = downstream_of_segment(j);
    std::set<int> out;
    std::set_difference(dj.begin(), dj.end(), ds.begin(), ds.end(),
                        std::inserter(out, out.begin()));
    return out;
}

double StreamNetwork::weight_product(SiteId a, SiteId b, const std::array<double, 4>& sqrt_w) const {
    if (!flow_connected(a, b)) fail(ErrorKind::Domain, "weight product requested for unconnected sites");
    double p = 1.0;
    for (int k : between(a, b)) p *= sqrt_w[k];
    return p;
}

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Lookup: return "lookup";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::Capability: return "capability";
        case ErrorKind::Misuse: return "misuse";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Internal: return "internal";
    }
    return "unknown";
}

}  // namespace streamgp
