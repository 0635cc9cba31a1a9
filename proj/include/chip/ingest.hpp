#pragma once

// Reading relational event CSV files into an EventLog.

#include <chip/errors.hpp>
#include <chip/event_log.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chip {

struct IngestOptions {
    /// Map times affinely so the earliest becomes 0 and the latest `time_scale`.
    bool normalize{true};
    double time_scale{1000.0};
    /// Keep only the largest connected component, ignoring edge direction.
    bool largest_component{false};
    /// Horizon when not normalizing; defaults to the last event time.
    std::optional<double> horizon{};
};

struct IngestReport {
    EventLog log;
    std::vector<std::string> tokens;  // token of node id i
    std::size_t rows{0};
    std::size_t self_edges_dropped{0};
    std::size_t ties_perturbed{0};
    std::size_t component_nodes_dropped{0};
    std::size_t component_events_dropped{0};
    double raw_min_time{0.0};
    double raw_max_time{0.0};
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_time(std::string_view s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError("unparseable timestamp '" + std::string(s) + "'", line);
    return v;
}

struct RawRow {
    std::string sender;
    std::string receiver;
    double time;
};

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

// Makes each pair's times strictly increasing by nudging later duplicates up
// one representable step at a time; a pass from the end pulls back anything
// pushed past `upper`. Returns the number of times changed.
inline std::size_t perturb_ties(std::vector<Event>& events, double upper) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_pair;
    for (std::size_t i = 0; i < events.size(); ++i)
        by_pair[(std::uint64_t{events[i].sender} << 32) | events[i].receiver].push_back(i);
    std::size_t changed = 0;
    for (auto& [key, idx] : by_pair) {
        (void)key;
        bool touched = false;
        for (std::size_t q = 1; q < idx.size(); ++q) {
            double& t = events[idx[q]].time;
            const double prev = events[idx[q - 1]].time;
            if (!(t > prev)) {
                t = std::nextafter(prev, std::numeric_limits<double>::infinity());
                ++changed;
                touched = true;
            }
        }
        if (touched && events[idx.back()].time > upper) {
            events[idx.back()].time = upper;
            for (std::size_t q = idx.size() - 1; q-- > 0;) {
                double& t = events[idx[q]].time;
                const double next = events[idx[q + 1]].time;
                if (!(t < next)) t = std::nextafter(next, -std::numeric_limits<double>::infinity());
            }
        }
    }
    return changed;
}

}  // namespace detail

/// Parses `sender,receiver,timestamp` rows (header required). Node tokens are
/// opaque strings given dense ids in order of first appearance after a stable
/// sort by time. Self-edges are dropped and counted. Exact duplicate times
/// within a node pair are separated by the smallest representable step.
inline IngestReport ingest_csv(std::istream& in, const IngestOptions& opt = {}) {
    IngestReport rep;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<detail::RawRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = detail::trim(line);
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view);
        if (!header_seen) {
            if (fields.size() != 3 || fields[0] != "sender" || fields[1] != "receiver" || fields[2] != "timestamp")
                throw ParseError("expected header 'sender,receiver,timestamp'", line_no);
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), line_no);
        if (fields[0].empty() || fields[1].empty()) throw ParseError("empty node token", line_no);
        const double t = detail::parse_time(fields[2], line_no);
        ++rep.rows;
        if (fields[0] == fields[1]) {
            ++rep.self_edges_dropped;
            continue;
        }
        rows.push_back({std::string(fields[0]), std::string(fields[1]), t});
    }
    if (!header_seen) throw ParseError("empty file", 0);
    if (rows.empty()) throw ParseError("no events besides self-edges", 0);

    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.time < b.time; });

    std::unordered_map<std::string, NodeId> ids;
    auto id_of = [&](const std::string& token) {
        auto [it, inserted] = ids.try_emplace(token, static_cast<NodeId>(rep.tokens.size()));
        if (inserted) rep.tokens.push_back(token);
        return it->second;
    };
    std::vector<Event> events;
    events.reserve(rows.size());
    for (const auto& r : rows) {
        const NodeId s = id_of(r.sender);
        const NodeId d = id_of(r.receiver);
        events.push_back({s, d, r.time});
    }

    if (opt.largest_component) {
        const std::size_t n = rep.tokens.size();
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        for (const auto& e : events) {
            const auto a = detail::find_root(parent, e.sender), b = detail::find_root(parent, e.receiver);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
        std::vector<std::size_t> size(n, 0);
        for (std::size_t i = 0; i < n; ++i) ++size[detail::find_root(parent, i)];
        // Largest by node count; the component seen first wins ties.
        std::size_t best = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (size[i] > size[best]) best = i;
        std::vector<Event> kept;
        kept.reserve(events.size());
        for (const auto& e : events)
            if (detail::find_root(parent, e.sender) == best) kept.push_back(e);
        rep.component_nodes_dropped = n - size[best];
        rep.component_events_dropped = events.size() - kept.size();
        // Re-number the survivors by first appearance.
        std::vector<std::int64_t> remap(n, -1);
        std::vector<std::string> tokens;
        for (auto& e : kept) {
            for (NodeId* v : {&e.sender, &e.receiver}) {
                if (remap[*v] < 0) {
                    remap[*v] = static_cast<std::int64_t>(tokens.size());
                    tokens.push_back(rep.tokens[*v]);
                }
                *v = static_cast<NodeId>(remap[*v]);
            }
        }
        events = std::move(kept);
        rep.tokens = std::move(tokens);
    }

    rep.raw_min_time = events.front().time;
    rep.raw_max_time = events.back().time;
    double horizon = 0.0;
    if (opt.normalize) {
        const double lo = rep.raw_min_time, hi = rep.raw_max_time;
        if (!(hi > lo)) throw DomainError("ingest: all timestamps are equal, cannot normalize");
        // Already on [0, scale]: the affine map is the identity, applied as such
        // so that re-ingesting a normalized file changes nothing.
        if (!(lo == 0.0 && hi == opt.time_scale)) {
            for (auto& e : events) e.time = (e.time - lo) / (hi - lo) * opt.time_scale;
        }
        horizon = opt.time_scale;
    } else {
        if (rep.raw_min_time < 0.0) throw DomainError("ingest: negative timestamps need normalization");
        horizon = opt.horizon.value_or(rep.raw_max_time);
        if (!(horizon > 0.0) || horizon < rep.raw_max_time)
            throw DomainError("ingest: horizon must be positive and cover every event");
    }
    rep.ties_perturbed = detail::perturb_ties(events, horizon);
    if (rep.ties_perturbed) sort_by_time(events);

    rep.log.events = std::move(events);
    rep.log.num_nodes = rep.tokens.size();
    rep.log.horizon = horizon;
    rep.log.validate();
    return rep;
}

inline IngestReport ingest_file(const std::string& path, const IngestOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'", 0);
    return ingest_csv(in, opt);
}

inline std::string serialize(const EventLog& log) {
    std::ostringstream out;
    write_csv(out, log);
    return out.str();
}

}  // namespace chip
