#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "equicom/transport.hpp"

namespace equicom::transport {

class SimConnection;
class SimListener;

// Deterministic in-memory network. Single-threaded and externally stepped:
// nothing moves until the owner calls step()/run_for()/run_until(). Identical
// seed + identical call sequence reproduces every delivery time and order
// exactly.
//
// Scheduling: each message draws a per-link uniform latency in
// [latency_lo_ms, latency_hi_ms]; arrivals within one direction of one
// connection are clamped strictly increasing (FIFO); events at equal times
// across links are ordered by a seeded random draw taken at insertion, then
// insertion order.
class SimNet : public Transport {
public:
    struct Config {
        std::uint64_t seed = 0;
        std::uint32_t latency_lo_ms = 1;
        std::uint32_t latency_hi_ms = 5;
    };

    explicit SimNet(Config cfg);

    std::shared_ptr<Listener> listen(const std::string& addr) override;
    std::shared_ptr<Connection> dial(const std::string& addr) override;
    std::uint64_t schedule(std::uint64_t delay_ms, std::function<void()> fn) override;
    void cancel(std::uint64_t timer_id) override;
    std::uint64_t now_ms() const override { return now_; }

    // Applies the earliest pending event; false means idle (nothing queued).
    bool step();

    // Applies every event due within the next `duration_ms` of simulated
    // time, then advances the clock to the end of the window. Returns the
    // number of events applied.
    std::size_t run_for(std::uint64_t duration_ms);

    // Steps until `done()` or until `budget_ms` of simulated time has been
    // spent; returns done()'s final value. The predicate is polled between
    // events, so it sees every intermediate state.
    bool run_until(const std::function<bool()>& done, std::uint64_t budget_ms);

    std::uint32_t max_latency_ms() const { return cfg_.latency_hi_ms; }

private:
    friend class SimConnection;
    friend class SimListener;

    struct Event {
        std::uint64_t time = 0;
        std::uint64_t tiebreak = 0;
        std::uint64_t seq = 0;
        std::uint64_t timer_id = 0;  // 0 = not a timer
        std::function<void()> fn;
    };
    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            if (a.tiebreak != b.tiebreak) return a.tiebreak > b.tiebreak;
            return a.seq > b.seq;
        }
    };

    void push_event(std::uint64_t time, std::function<void()> fn, std::uint64_t timer_id = 0);
    std::uint64_t draw_latency();
    void unbind(const std::string& locator);
    bool apply_one(std::uint64_t limit);

    Config cfg_;
    std::mt19937_64 rng_;
    std::uint64_t now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_timer_id_ = 1;
    std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
    std::set<std::uint64_t> cancelled_timers_;
    std::map<std::string, std::weak_ptr<SimListener>> listeners_;
    std::uint64_t next_conn_seq_ = 1;
};

}  // namespace equicom::transport
