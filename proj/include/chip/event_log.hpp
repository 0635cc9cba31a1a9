#pragma once

#include <chip/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace chip {

using NodeId = std::uint32_t;

/// One relational event. Node ids are 0-based in memory and 1-based in files.
struct Event {
    NodeId sender{0};
    NodeId receiver{0};
    double time{0.0};

    friend bool operator==(const Event&, const Event&) = default;
};

/// Timestamped relational events among `num_nodes` nodes on [0, horizon].
struct EventLog {
    std::vector<Event> events;
    std::size_t num_nodes{0};
    double horizon{1.0};

    std::size_t size() const noexcept { return events.size(); }
    bool empty() const noexcept { return events.empty(); }

    /// Throws DomainError on self-edges, ids out of range, times outside the
    /// window, or events out of time order.
    void validate() const {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("event log horizon must be positive");
        double prev = -std::numeric_limits<double>::infinity();
        for (const auto& e : events) {
            if (e.sender == e.receiver) throw DomainError("event log contains a self-edge");
            if (e.sender >= num_nodes || e.receiver >= num_nodes) throw DomainError("event log node id out of range");
            if (!(e.time >= 0.0) || e.time > horizon) throw DomainError("event time outside [0, horizon]");
            if (e.time < prev) throw DomainError("event log is not sorted by time");
            prev = e.time;
        }
    }

    friend bool operator==(const EventLog&, const EventLog&) = default;
};

/// Stable sort by timestamp; events with equal times keep their input order.
inline void sort_by_time(std::vector<Event>& events) {
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
}

/// Writes `sender,receiver,timestamp` rows with 1-based ids. Times are printed
/// with 17 significant digits so they read back bit-exact.
inline void write_csv(std::ostream& out, const EventLog& log) {
    out << "sender,receiver,timestamp\n";
    char buf[64];
    for (const auto& e : log.events) {
        std::snprintf(buf, sizeof buf, "%.17g", e.time);
        out << (e.sender + 1) << ',' << (e.receiver + 1) << ',' << buf << '\n';
    }
}

/// Events grouped by ordered node pair: pairs sorted by (sender, receiver),
/// each pair's times ascending. Pairs without events are absent.
class PairEvents {
public:
    struct Pair {
        NodeId sender;
        NodeId receiver;
    };

    PairEvents() = default;

    explicit PairEvents(const EventLog& log) : offsets_{}, num_nodes_(log.num_nodes), horizon_(log.horizon) {
        std::vector<std::size_t> order(log.events.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const Event& x = log.events[a];
            const Event& y = log.events[b];
            if (x.sender != y.sender) return x.sender < y.sender;
            if (x.receiver != y.receiver) return x.receiver < y.receiver;
            return x.time < y.time;
        });
        times_.reserve(order.size());
        for (std::size_t idx : order) {
            const Event& e = log.events[idx];
            if (pairs_.empty() || pairs_.back().sender != e.sender || pairs_.back().receiver != e.receiver) {
                pairs_.push_back({e.sender, e.receiver});
                offsets_.push_back(times_.size());
            }
            times_.push_back(e.time);
        }
        offsets_.push_back(times_.size());
    }

    PairEvents(std::size_t num_nodes, double horizon) : offsets_{0}, num_nodes_(num_nodes), horizon_(horizon) {}

    /// Appends one pair's events; pairs must arrive in (sender, receiver) order.
    void append(NodeId sender, NodeId receiver, std::span<const double> times) {
        if (!pairs_.empty()) {
            const Pair& last = pairs_.back();
            if (sender < last.sender || (sender == last.sender && receiver <= last.receiver))
                throw DomainError("PairEvents::append: pairs out of order");
        }
        pairs_.push_back({sender, receiver});
        times_.insert(times_.end(), times.begin(), times.end());
        offsets_.push_back(times_.size());
    }

    std::size_t num_pairs() const noexcept { return pairs_.size(); }
    std::size_t num_events() const noexcept { return times_.size(); }
    std::size_t num_nodes() const noexcept { return num_nodes_; }
    double horizon() const noexcept { return horizon_; }
    const Pair& pair(std::size_t p) const { return pairs_[p]; }
    std::span<const double> times(std::size_t p) const {
        return std::span<const double>(times_).subspan(offsets_[p], offsets_[p + 1] - offsets_[p]);
    }

private:
    std::vector<Pair> pairs_;
    std::vector<std::size_t> offsets_{0};
    std::vector<double> times_;
    std::size_t num_nodes_{0};
    double horizon_{1.0};
};

}  // namespace chip
