// Acceptance gate: every release-blocking behavior in one binary, one
// [PASS]/[FAIL] line each, wall-clock limits enforced. Exit 0 iff all pass.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "equicom/communicator.hpp"
#include "equicom/errors.hpp"
#include "equicom/harness.hpp"
#include "equicom/routing.hpp"
#include "equicom/sim_net.hpp"
#include "equicom/wire.hpp"
#include "support/frame_gen.hpp"
#include "support/routing_oracle.hpp"

#ifndef EQUICOM_SCENARIO_DIR
#error "EQUICOM_SCENARIO_DIR must be defined"
#endif
#ifndef EQUICOM_BIN_PATH
#error "EQUICOM_BIN_PATH must be defined"
#endif

using namespace equicom;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

void fail(Outcome& o, const std::string& why) {
    if (o.pass) {
        o.pass = false;
        o.detail = why;
    }
}

std::string scen(const std::string& name) {
    return std::string(EQUICOM_SCENARIO_DIR) + "/" + name;
}

// ---------------------------------------------------------------- 1. fig2
Outcome check_fig2_golden() {
    Outcome o;
    auto sc = harness::load_scenario(scen("fig2.json"));
    harness::GoldenReport reference;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        harness::RunOptions opts;
        opts.seed = seed;
        auto report = harness::run_scenario(sc, opts);
        auto d = harness::diff_golden(report, scen("fig2.golden.json"));
        if (!d.pass) {
            fail(o, "seed " + std::to_string(seed) + ": " + d.detail);
            return o;
        }
        // Deliveries must be seed-invariant; timing-dependent diagnostics
        // are allowed to differ.
        if (seed == 0) {
            reference = report;
        } else if (!(report == reference)) {
            fail(o, "seed " + std::to_string(seed) + " delivered differently than seed 0");
            return o;
        }
    }
    return o;
}

// -------------------------------------------------------------- 2. pubsub
Outcome check_pubsub_golden() {
    Outcome o;
    auto sc = harness::load_scenario(scen("pubsub.json"));
    harness::RunOptions opts;
    auto report = harness::run_scenario(sc, opts);
    auto d = harness::diff_golden(report, scen("pubsub.golden.json"));
    if (!d.pass) {
        fail(o, d.detail);
        return o;
    }
    auto payloads = [&](std::uint64_t node) {
        std::vector<std::string> out;
        auto it = report.deliveries.find(node);
        if (it != report.deliveries.end()) {
            for (const auto& e : it->second) out.push_back(e.payload);
        }
        return out;
    };
    const std::vector<std::string> all = {"t1aaaaa", "t1bbbbb", "bbbt1bb",
                                          "t2ccccc", "t2ddddd", "t3ddddd"};
    if (payloads(1) != std::vector<std::string>{"t1aaaaa", "t1bbbbb"}) {
        fail(o, "prefix subscriber received the wrong list");
    }
    if (payloads(2) != all) {
        fail(o, "match-all subscriber did not receive all six in send order");
    }
    return o;
}

// ------------------------------------------------------------ 3. pushpull
Outcome check_pushpull_split() {
    Outcome o;
    auto sc = harness::load_scenario(scen("pushpull.json"));

    std::vector<std::string> send_order;
    for (const auto& ev : sc.events) {
        if (ev.kind == harness::ScenarioEvent::Kind::Send) send_order.push_back(ev.send.payload);
    }
    if (send_order.size() != 12) {
        fail(o, "scenario does not carry 12 sends");
        return o;
    }

    harness::RunOptions opts;
    auto report = harness::run_scenario(sc, opts);
    auto d = harness::diff_golden(report, scen("pushpull.golden.json"));
    if (!d.pass) {
        fail(o, d.detail);
        return o;
    }

    auto list = [&](std::uint64_t node) -> std::vector<std::string> {
        std::vector<std::string> out;
        auto it = report.deliveries.find(node);
        if (it != report.deliveries.end()) {
            for (const auto& e : it->second) out.push_back(e.payload);
        }
        return out;
    };
    auto one = list(1);
    auto two = list(2);
    if (one.size() != 6 || two.size() != 6) {
        fail(o, "split is " + std::to_string(one.size()) + "/" + std::to_string(two.size()) +
                    ", want 6/6");
        return o;
    }
    std::set<std::string> seen;
    for (const auto& u : one) seen.insert(u);
    for (const auto& u : two) seen.insert(u);
    if (seen.size() != 12) {
        fail(o, "receiver lists overlap or lose payloads: union has " +
                    std::to_string(seen.size()) + " of 12");
        return o;
    }
    for (const auto* lst : {&one, &two}) {
        std::size_t cursor = 0;
        for (const auto& u : *lst) {
            while (cursor < send_order.size() && send_order[cursor] != u) ++cursor;
            if (cursor == send_order.size()) {
                fail(o, "receiver list is not in send order (out of place: " + u + ")");
                return o;
            }
            ++cursor;
        }
    }
    return o;
}

// --------------------------------------------------------------- 4. codec
Outcome check_codec() {
    Outcome o;
    std::mt19937_64 rng(0xC0DEC);
    for (int i = 0; i < 1500; ++i) {
        auto frame = testsupport::random_frame(rng);
        auto bytes = wire::encode_frame(frame);
        auto res = wire::decode_frame(bytes);
        if (!res.ok() || !(res.frame == frame) || res.consumed != bytes.size()) {
            fail(o, "round-trip " + std::to_string(i) + " failed (" +
                        wire::decode_status_name(res.status) + ")");
            return o;
        }
    }

    std::vector<std::uint8_t> junk = {0xde, 0xad, 0x01, 0x06, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 0};
    if (wire::decode_frame(junk).status != wire::DecodeStatus::BadMagic) {
        fail(o, "wrong magic not flagged");
    }

    auto ping = wire::encode_frame(wire::Frame::ping(7));
    auto cut = std::vector<std::uint8_t>(ping.begin(), ping.end() - 1);
    auto trunc = wire::decode_frame(cut);
    if (trunc.status != wire::DecodeStatus::Truncated || trunc.consumed != 0) {
        fail(o, "short frame not reported as truncated");
    }

    std::vector<std::uint8_t> fat_bye = {0x55, 0x43, 0x01, 0x08, 0, 0, 0, 1, 0xaa};
    if (wire::decode_frame(fat_bye).status != wire::DecodeStatus::MalformedBody) {
        fail(o, "oversized empty-body frame not flagged as malformed");
    }
    return o;
}

// ------------------------------------------------------ 5. routing oracle
Outcome check_routing_oracle() {
    Outcome o;
    using routing::RoutingDirective;

    // Subscription alphabet: empty (match-all), a prefix, and its extension.
    const std::vector<std::string> alphabet = {"", "a", "ab"};
    // Every valid directive over {a, ab, b} (+ the broadcast/group empties);
    // "b" has no exact subscriber, so miss paths stay exercised.
    std::vector<RoutingDirective> dirs;
    for (const char* t : {"a", "ab", "b"}) dirs.push_back({Mechanism::Private, t});
    dirs.push_back({Mechanism::Broadcast, ""});
    for (const char* t : {"", "a", "ab", "b"}) dirs.push_back({Mechanism::GroupBroadcast, t});
    for (const char* t : {"a", "ab", "b"}) dirs.push_back({Mechanism::Balance, t});
    const std::size_t nd = dirs.size();

    std::uint64_t checked = 0;
    for (int k = 0; k <= 4; ++k) {
        std::vector<int> assign(k, 0);  // per-node subset code 0..7
        while (true) {
            PortMappingTable table;
            for (int i = 0; i < k; ++i) {
                PeerRecord rec;
                rec.id = NodeId(i + 1);
                rec.addr = "sim:n" + std::to_string(i + 1);
                for (int b = 0; b < 3; ++b) {
                    if (assign[i] & (1 << b)) rec.subscriptions.insert(alphabet[b]);
                }
                table[rec.id] = rec;
            }
            auto subs = routing::subscription_view(table);

            std::vector<NodeId> senders = {9};  // not in the table
            if (k >= 1) senders.push_back(1);   // lowest id, in the table
            for (NodeId sender : senders) {
                // One persistent rr pair per (table, sender): successive
                // directive lists advance both sides through many counter
                // offsets for free.
                routing::RoundRobinState rr_impl, rr_oracle;
                for (int len = 1; len <= 3; ++len) {
                    std::vector<std::size_t> pick(len, 0);
                    while (true) {
                        std::vector<RoutingDirective> list;
                        for (int p = 0; p < len; ++p) list.push_back(dirs[pick[p]]);

                        auto got = routing::resolve_recipients(list, table, subs, rr_impl,
                                                               sender);
                        auto want = testsupport::oracle_resolve(list, table, subs, rr_oracle,
                                                                sender);
                        ++checked;
                        if (got.recipients != want.recipients ||
                            got.no_recipient_directives != want.no_recipient_directives ||
                            got.private_tag_conflicts != want.private_tag_conflicts ||
                            got.dedup_suppressed != want.dedup_suppressed ||
                            rr_impl.counters != rr_oracle.counters) {
                            std::string desc = "mismatch at k=" + std::to_string(k) +
                                               " sender=" + std::to_string(sender) + " dirs=[";
                            for (const auto& d : list) {
                                desc += std::string(mechanism_name(d.mechanism)) + ":" + d.tag +
                                        " ";
                            }
                            desc += "] after " + std::to_string(checked) + " checks";
                            fail(o, desc);
                            return o;
                        }

                        int p = len - 1;
                        while (p >= 0 && ++pick[p] == nd) pick[p--] = 0;
                        if (p < 0) break;
                    }
                }
            }

            int i = k - 1;
            while (i >= 0 && ++assign[i] == 8) assign[i--] = 0;
            if (i < 0) break;
        }
    }
    o.detail = std::to_string(checked) + " configurations agreed";
    return o;
}

// -------------------------------------------------- 6. membership converge
Outcome check_membership_convergence() {
    Outcome o;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const int family = int(s % 4);
        const int n = 2 + int((s * 7) % 15);  // 2..16

        transport::SimNet net({0xBEEF00 + s});
        std::mt19937_64 rng(s);

        // Bootstrap lists per node; node j's address is bound before any
        // higher-numbered node dials it, except the ring's wrap edge, which
        // the dial retry covers.
        std::vector<std::vector<std::string>> boot(n);
        auto addr = [](int i) { return "sim:m" + std::to_string(i); };
        for (int i = 1; i < n; ++i) {
            switch (family) {
                case 0: boot[i] = {addr(i - 1)}; break;                   // path
                case 1: boot[i] = {addr(i - 1)}; break;                   // ring
                case 2: boot[i] = {addr(0)}; break;                       // star
                case 3: boot[i] = {addr(int(rng() % std::uint64_t(i)))}; break;  // random tree
            }
        }
        if (family == 1) boot[0] = {addr(n - 1)};
        if (family == 3) {
            for (int extra = 0; extra < n / 3; ++extra) {
                int i = 1 + int(rng() % std::uint64_t(n - 1));
                int j = int(rng() % std::uint64_t(i));
                boot[i].push_back(addr(j));
            }
        }

        std::vector<std::shared_ptr<Communicator>> comms;
        for (int i = 0; i < n; ++i) {
            CommunicatorConfig cfg;
            cfg.node_id = NodeId(i + 1);
            cfg.listen = addr(i);
            cfg.bootstrap = boot[i];
            comms.push_back(Communicator::create(cfg, net));
        }

        // Converged: every table names the other N-1 nodes with their true
        // addresses — the same entries everywhere.
        auto converged = [&] {
            for (int i = 0; i < n; ++i) {
                auto peers = comms[i]->peers();
                if (peers.size() != std::size_t(n - 1)) return false;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    auto it = peers.find(NodeId(j + 1));
                    if (it == peers.end()) return false;
                    if (it->second.addr != addr(j)) return false;
                    if (!it->second.subscriptions.empty()) return false;
                }
            }
            return true;
        };

        // N gossip rounds at the default 200 ms cadence, plus dial slack.
        const std::uint64_t budget = std::uint64_t(n) * 200 + 100;
        if (!net.run_until(converged, budget)) {
            const char* names[] = {"path", "ring", "star", "random"};
            fail(o, std::string(names[family]) + " N=" + std::to_string(n) + " seed " +
                        std::to_string(s) + " did not converge in " + std::to_string(budget) +
                        " sim ms");
            for (auto& c : comms) c->shutdown();
            return o;
        }
        for (auto& c : comms) c->shutdown();
    }
    return o;
}

// ------------------------------------- 7. one port / fifo / at-most-once
Outcome check_port_fifo_once() {
    Outcome o;
    std::uint64_t total_deliveries = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        transport::SimNet net({seed});
        std::mt19937_64 rng(seed ^ 0x5151);
        const int n = 5;
        const std::vector<std::string> tags = {"a", "ab", "b"};

        std::vector<std::shared_ptr<Communicator>> comms;
        std::vector<std::set<std::string>> declared(n);
        for (int i = 0; i < n; ++i) {
            CommunicatorConfig cfg;
            cfg.node_id = NodeId(i + 1);
            cfg.listen = "sim:c" + std::to_string(i + 1);
            if (i > 0) cfg.bootstrap = {"sim:c1"};
            comms.push_back(Communicator::create(cfg, net));
            for (const auto& t : tags) {
                if (rng() % 2) declared[i].insert(t);
            }
            if (rng() % 4 == 0) declared[i].insert("");
            for (const auto& t : declared[i]) comms[i]->subscribe(t);
        }

        auto converged = [&] {
            for (int i = 0; i < n; ++i) {
                auto peers = comms[i]->peers();
                if (peers.size() != std::size_t(n - 1)) return false;
                for (int j = 0; j < n; ++j) {
                    if (j != i && peers.at(NodeId(j + 1)).subscriptions != declared[j]) {
                        return false;
                    }
                }
            }
            return true;
        };
        if (!net.run_until(converged, 10000)) {
            fail(o, "seed " + std::to_string(seed) + ": cluster never converged");
            return o;
        }

        for (int msg = 0; msg < 40; ++msg) {
            auto& sender = comms[rng() % n];
            std::vector<routing::RoutingDirective> list;
            const int len = 1 + int(rng() % 2);
            for (int d = 0; d < len; ++d) {
                switch (rng() % 4) {
                    case 0: list.push_back({Mechanism::Private, tags[rng() % 3]}); break;
                    case 1: list.push_back({Mechanism::Broadcast, ""}); break;
                    case 2: list.push_back({Mechanism::GroupBroadcast, tags[rng() % 3]}); break;
                    default: list.push_back({Mechanism::Balance, tags[rng() % 3]}); break;
                }
            }
            sender->send(Message::text("m" + std::to_string(msg), list));
            if (rng() % 3 == 0) net.run_for(1 + rng() % 4);
        }
        net.run_for(200);

        if (net.listen_log().size() != std::size_t(n)) {
            fail(o, "seed " + std::to_string(seed) + ": " +
                        std::to_string(net.listen_log().size()) + " endpoints bound, want " +
                        std::to_string(n));
            return o;
        }
        for (int i = 0; i < n; ++i) {
            std::set<std::pair<NodeId, std::uint64_t>> seen;
            std::map<NodeId, std::uint64_t> last_seq;
            while (auto d = comms[i]->try_recv()) {
                ++total_deliveries;
                if (!seen.insert({d->sender, d->seq}).second) {
                    fail(o, "seed " + std::to_string(seed) + ": duplicate (sender " +
                                std::to_string(d->sender) + ", seq " + std::to_string(d->seq) +
                                ") at node " + std::to_string(i + 1));
                    return o;
                }
                auto it = last_seq.find(d->sender);
                if (it != last_seq.end() && d->seq <= it->second) {
                    fail(o, "seed " + std::to_string(seed) + ": seq went backwards at node " +
                                std::to_string(i + 1));
                    return o;
                }
                last_seq[d->sender] = d->seq;
            }
        }
        for (auto& c : comms) c->shutdown();
    }
    if (total_deliveries == 0) fail(o, "chatter produced no deliveries at all");
    o.detail = std::to_string(total_deliveries) + " deliveries checked";
    return o;
}

// ------------------------------------------------------- 8. bench objects
Outcome check_bench_objects_cli() {
    Outcome o;
    std::string cmd = std::string(EQUICOM_BIN_PATH) + " bench --mode objects --scenario " +
                      scen("fig2.json") + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        fail(o, "could not launch the cli");
        return o;
    }
    std::string out;
    char buf[512];
    while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
    int rc = pclose(pipe);
    if (rc != 0) {
        fail(o, "cli exited with status " + std::to_string(rc));
        return o;
    }
    if (out.find("\"object_count\": 4") == std::string::npos) {
        fail(o, "report does not say 4 objects: " + out);
        return o;
    }
    if (out.find("\"baseline_sockets\": 12") == std::string::npos ||
        out.find("Mangos") == std::string::npos) {
        fail(o, "report does not cite the 12-socket baseline");
    }
    return o;
}

// ----------------------------------------------------------- 9. tcp smoke
Outcome check_tcp_smoke() {
    Outcome o;
    auto sc = harness::load_scenario(scen("fig2.json"));

    harness::RunOptions sim_opts;
    sim_opts.seed = 3;
    auto sim_report = harness::run_scenario(sc, sim_opts);

    harness::RunOptions tcp_opts;
    tcp_opts.transport = "tcp";
    auto tcp_report = harness::run_scenario(sc, tcp_opts);

    auto sort_entries = [](harness::GoldenReport& r) {
        for (auto& [node, list] : r.deliveries) {
            std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
                return std::tie(a.mechanism, a.tag, a.payload) <
                       std::tie(b.mechanism, b.tag, b.payload);
            });
        }
    };
    sort_entries(sim_report);
    sort_entries(tcp_report);
    auto d = harness::diff_reports(tcp_report, sim_report);
    if (!d.pass) fail(o, d.detail);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"fig2 golden, 20 seeds", 5.0, check_fig2_golden},
        {"pubsub golden", 5.0, check_pubsub_golden},
        {"pushpull 6/6 round-robin split", 5.0, check_pushpull_split},
        {"codec round-trip + malformed classes", 10.0, check_codec},
        {"routing matches oracle, exhaustive", 60.0, check_routing_oracle},
        {"membership convergence, 50 runs", 30.0, check_membership_convergence},
        {"one port / fifo / at-most-once, 100 seeds", 60.0, check_port_fifo_once},
        {"bench objects = 4 vs 12-socket baseline", 30.0, check_bench_objects_cli},
        {"tcp deliveries match sim", 15.0, check_tcp_smoke},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            fail(o, std::string("threw: ") + e.what());
        }
        double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && dt >= c.limit_s) fail(o, "exceeded the time limit");
        std::printf("[%s] %-42s %7.2fs (limit %2.0fs)%s%s\n", o.pass ? "PASS" : "FAIL", c.name,
                    dt, c.limit_s, o.detail.empty() ? "" : " — ", o.detail.c_str());
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
