#include "equicom/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "equicom/errors.hpp"
#include "equicom/log.hpp"
#include "equicom/sim_net.hpp"
#include "equicom/tcp_transport.hpp"

namespace equicom::harness {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

routing::RoutingDirective parse_directive(const json& j, const std::string& origin) {
    routing::RoutingDirective d;
    auto name = j.at("mech").get<std::string>();
    auto mech = mechanism_from_name(name);
    if (!mech) {
        throw Error(Errc::ValidationError, origin + ": unknown mechanism \"" + name + "\"");
    }
    d.mechanism = *mech;
    if (j.contains("tag")) d.tag = j.at("tag").get<std::string>();
    return d;
}

void validate_scenario(const Scenario& s, const std::string& origin) {
    std::set<std::uint64_t> ids;
    for (const auto& node : s.nodes) {
        if (!ids.insert(node.id).second) {
            throw Error(Errc::ValidationError,
                        origin + ": duplicate node id " + std::to_string(node.id));
        }
    }
    for (const auto& ev : s.events) {
        if (ev.kind != ScenarioEvent::Kind::Send) continue;
        if (!ids.count(ev.send.node)) {
            throw Error(Errc::ValidationError,
                        origin + ": send references undeclared node " +
                            std::to_string(ev.send.node));
        }
        if (ev.send.directives.empty()) {
            throw Error(Errc::ValidationError, origin + ": send with no directives");
        }
        for (const auto& d : ev.send.directives) {
            if (!routing::directive_valid(d)) {
                throw Error(Errc::ValidationError,
                            origin + ": invalid directive " +
                                std::string(mechanism_name(d.mechanism)) + "/\"" + d.tag + "\"");
            }
        }
    }
}

std::string entry_str(const ReportEntry& e) {
    return "(" + std::string(mechanism_name(e.mechanism)) + ", \"" + e.tag + "\", \"" + e.payload +
           "\")";
}

ReportEntry entry_from(const Delivery& d) {
    ReportEntry e;
    e.sender = scenario_id(d.sender);
    e.seq = d.seq;
    e.mechanism = d.mechanism;
    e.tag = d.tag;
    e.payload = d.text();
    return e;
}

void normalize(GoldenReport& report) {
    for (auto& [id, entries] : report.deliveries) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const ReportEntry& a, const ReportEntry& b) {
                             return a.sender < b.sender;
                         });
    }
}

void accumulate_totals(GoldenReport& report,
                       const std::vector<std::shared_ptr<Communicator>>& comms) {
    for (const auto& comm : comms) {
        auto d = comm->diagnostics();
        report.totals.sent_frames += d.sent_frames;
        report.totals.dropped_no_recipient += d.dropped_no_recipient;
        report.totals.private_tag_conflicts += d.private_tag_conflicts;
        report.totals.dedup_suppressed += d.dedup_suppressed;
        report.totals.evicted_peers += d.evicted_peers;
    }
}

// root first, everyone else in declaration order.
std::vector<std::size_t> creation_order(std::size_t n, std::size_t root) {
    std::vector<std::size_t> order;
    order.push_back(root);
    for (std::size_t i = 0; i < n; ++i) {
        if (i != root) order.push_back(i);
    }
    return order;
}

struct Cluster {
    std::vector<std::shared_ptr<Communicator>> comms;  // scenario order
    std::map<std::uint64_t, std::size_t> index_of;     // scenario id -> index
};

// Exact convergence against declared ground truth: every table holds every
// other node with its actual address and declared subscriptions.
bool converged(const Scenario& s, const Cluster& cluster) {
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        auto table = cluster.comms[i]->peers();
        if (table.size() != s.nodes.size() - 1) return false;
        for (std::size_t j = 0; j < s.nodes.size(); ++j) {
            if (j == i) continue;
            auto it = table.find(wire_id(s.nodes[j].id));
            if (it == table.end()) return false;
            if (it->second.addr != cluster.comms[j]->listen_address()) return false;
            std::set<std::string> declared(s.nodes[j].subscribe.begin(),
                                           s.nodes[j].subscribe.end());
            if (it->second.subscriptions != declared) return false;
        }
    }
    return true;
}

GoldenReport collect_and_finish(Cluster& cluster,
                                std::map<std::uint64_t, std::vector<ReportEntry>>&& collected) {
    GoldenReport report;
    report.deliveries = std::move(collected);
    accumulate_totals(report, cluster.comms);
    for (auto& comm : cluster.comms) comm->shutdown();
    normalize(report);
    return report;
}

GoldenReport run_scenario_sim(const Scenario& s, const RunOptions& opts) {
    transport::SimNet net({opts.seed});
    Cluster cluster;
    cluster.comms.resize(s.nodes.size());
    for (std::size_t i = 0; i < s.nodes.size(); ++i) cluster.index_of[s.nodes[i].id] = i;

    const std::string root_addr = "sim:n" + std::to_string(s.nodes[opts.bootstrap_root].id);
    for (std::size_t idx : creation_order(s.nodes.size(), opts.bootstrap_root)) {
        const auto& node = s.nodes[idx];
        CommunicatorConfig cfg;
        cfg.node_id = wire_id(node.id);
        cfg.listen = "sim:n" + std::to_string(node.id);
        if (idx != opts.bootstrap_root) cfg.bootstrap = {root_addr};
        cluster.comms[idx] = Communicator::create(cfg, net);
        for (const auto& tag : node.subscribe) cluster.comms[idx]->subscribe(tag);
    }

    std::map<std::uint64_t, std::vector<ReportEntry>> collected;
    auto drain = [&]() {
        for (std::size_t i = 0; i < cluster.comms.size(); ++i) {
            while (auto d = cluster.comms[i]->try_recv()) {
                collected[s.nodes[i].id].push_back(entry_from(*d));
            }
        }
    };
    // Everything in flight is single-hop, so this window comfortably flushes
    // queued deliveries plus one gossip round.
    const std::uint64_t quiesce_ms = 4 * net.max_latency_ms() + 200;

    for (const auto& ev : s.events) {
        switch (ev.kind) {
            case ScenarioEvent::Kind::AwaitConvergence:
                if (!net.run_until([&]() { return converged(s, cluster); },
                                   opts.convergence_budget_ms)) {
                    throw Error(Errc::ConvergenceTimeout,
                                "overlay did not converge within " +
                                    std::to_string(opts.convergence_budget_ms) + " sim ms");
                }
                break;
            case ScenarioEvent::Kind::Send:
                cluster.comms[cluster.index_of.at(ev.send.node)]->send(
                    Message::text(ev.send.payload, ev.send.directives));
                break;
            case ScenarioEvent::Kind::Quiesce:
                net.run_for(quiesce_ms);
                drain();
                break;
        }
    }
    net.run_for(quiesce_ms);
    drain();
    return collect_and_finish(cluster, std::move(collected));
}

GoldenReport run_scenario_tcp(const Scenario& s, const RunOptions& opts) {
    transport::TcpTransport net;
    Cluster cluster;
    cluster.comms.resize(s.nodes.size());
    for (std::size_t i = 0; i < s.nodes.size(); ++i) cluster.index_of[s.nodes[i].id] = i;

    std::string root_addr;
    for (std::size_t idx : creation_order(s.nodes.size(), opts.bootstrap_root)) {
        const auto& node = s.nodes[idx];
        CommunicatorConfig cfg;
        cfg.node_id = wire_id(node.id);
        cfg.listen = "tcp:127.0.0.1:0";
        if (idx != opts.bootstrap_root) cfg.bootstrap = {root_addr};
        cluster.comms[idx] = Communicator::create(cfg, net);
        if (idx == opts.bootstrap_root) root_addr = cluster.comms[idx]->listen_address();
        for (const auto& tag : node.subscribe) cluster.comms[idx]->subscribe(tag);
    }

    std::map<std::uint64_t, std::vector<ReportEntry>> collected;
    auto drain = [&]() {
        for (std::size_t i = 0; i < cluster.comms.size(); ++i) {
            while (auto d = cluster.comms[i]->try_recv()) {
                collected[s.nodes[i].id].push_back(entry_from(*d));
            }
        }
    };

    for (const auto& ev : s.events) {
        switch (ev.kind) {
            case ScenarioEvent::Kind::AwaitConvergence: {
                auto deadline = std::chrono::steady_clock::now() +
                                std::chrono::milliseconds(opts.convergence_budget_ms);
                while (!converged(s, cluster)) {
                    if (std::chrono::steady_clock::now() > deadline) {
                        throw Error(Errc::ConvergenceTimeout,
                                    "overlay did not converge within " +
                                        std::to_string(opts.convergence_budget_ms) + " ms");
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(2));
                }
                break;
            }
            case ScenarioEvent::Kind::Send:
                cluster.comms[cluster.index_of.at(ev.send.node)]->send(
                    Message::text(ev.send.payload, ev.send.directives));
                break;
            case ScenarioEvent::Kind::Quiesce:
                std::this_thread::sleep_for(std::chrono::milliseconds(300));
                drain();
                break;
        }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    drain();
    return collect_and_finish(cluster, std::move(collected));
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, origin + ": " + e.what());
    }
    Scenario s;
    try {
        for (const auto& n : j.at("nodes")) {
            ScenarioNode node;
            node.id = n.at("id").get<std::uint64_t>();
            if (n.contains("subscribe")) {
                for (const auto& t : n.at("subscribe")) node.subscribe.push_back(t.get<std::string>());
            }
            s.nodes.push_back(std::move(node));
        }
        for (const auto& e : j.at("events")) {
            ScenarioEvent ev;
            if (e.contains("await_convergence")) {
                ev.kind = ScenarioEvent::Kind::AwaitConvergence;
            } else if (e.contains("send")) {
                ev.kind = ScenarioEvent::Kind::Send;
                const auto& send = e.at("send");
                ev.send.node = send.at("node").get<std::uint64_t>();
                for (const auto& d : send.at("directives")) {
                    ev.send.directives.push_back(parse_directive(d, origin));
                }
                ev.send.payload = send.at("payload").get<std::string>();
            } else if (e.contains("quiesce")) {
                ev.kind = ScenarioEvent::Kind::Quiesce;
            } else {
                throw Error(Errc::ParseError, origin + ": unknown event " + e.dump());
            }
            s.events.push_back(std::move(ev));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, origin + ": " + e.what());
    }
    validate_scenario(s, origin);
    return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

GoldenReport run_scenario(const Scenario& s, const RunOptions& opts) {
    if (s.nodes.empty()) return {};
    if (opts.bootstrap_root >= s.nodes.size()) {
        throw Error(Errc::InvalidArgument, "bootstrap_root out of range");
    }
    if (opts.transport == "sim") return run_scenario_sim(s, opts);
    if (opts.transport == "tcp") return run_scenario_tcp(s, opts);
    throw Error(Errc::InvalidArgument, "transport must be \"sim\" or \"tcp\"");
}

DiffResult diff_reports(const GoldenReport& actual, const GoldenReport& expected) {
    static const std::vector<ReportEntry> kEmpty;
    std::set<std::uint64_t> ids;
    for (const auto& [id, v] : actual.deliveries) ids.insert(id);
    for (const auto& [id, v] : expected.deliveries) ids.insert(id);
    for (std::uint64_t id : ids) {
        auto ait = actual.deliveries.find(id);
        auto eit = expected.deliveries.find(id);
        const auto& a = (ait != actual.deliveries.end()) ? ait->second : kEmpty;
        const auto& e = (eit != expected.deliveries.end()) ? eit->second : kEmpty;
        std::size_t common = std::min(a.size(), e.size());
        for (std::size_t k = 0; k < common; ++k) {
            if (a[k].mechanism != e[k].mechanism || a[k].tag != e[k].tag ||
                a[k].payload != e[k].payload) {
                return {false, "node " + std::to_string(id) + ", delivery " + std::to_string(k) +
                                   ": expected " + entry_str(e[k]) + ", got " + entry_str(a[k])};
            }
        }
        if (a.size() != e.size()) {
            const auto& surplus = (a.size() > e.size()) ? a[common] : e[common];
            const char* side = (a.size() > e.size()) ? "unexpected extra" : "missing";
            return {false, "node " + std::to_string(id) + ": expected " +
                               std::to_string(e.size()) + " deliveries, got " +
                               std::to_string(a.size()) + "; " + side + " " + entry_str(surplus)};
        }
    }
    return {true, ""};
}

DiffResult diff_golden(const GoldenReport& actual, const std::string& expected_path) {
    return diff_reports(actual, load_golden(expected_path));
}

GoldenReport parse_golden(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, origin + ": " + e.what());
    }
    GoldenReport report;
    try {
        for (const auto& [key, entries] : j.at("deliveries").items()) {
            std::uint64_t id = std::stoull(key);
            auto& list = report.deliveries[id];
            for (const auto& e : entries) {
                ReportEntry entry;
                auto name = e.at("mech").get<std::string>();
                auto mech = mechanism_from_name(name);
                if (!mech) {
                    throw Error(Errc::ValidationError,
                                origin + ": unknown mechanism \"" + name + "\"");
                }
                entry.mechanism = *mech;
                if (e.contains("tag")) entry.tag = e.at("tag").get<std::string>();
                entry.payload = e.at("payload").get<std::string>();
                list.push_back(std::move(entry));
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, origin + ": " + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(Errc::ParseError, origin + ": node key is not a number");
    }
    return report;
}

GoldenReport load_golden(const std::string& path) { return parse_golden(read_file(path), path); }

std::string report_to_json(const GoldenReport& report) {
    json j;
    j["deliveries"] = json::object();
    for (const auto& [id, entries] : report.deliveries) {
        json list = json::array();
        for (const auto& e : entries) {
            list.push_back({{"mech", std::string(mechanism_name(e.mechanism))},
                            {"tag", e.tag},
                            {"payload", e.payload}});
        }
        j["deliveries"][std::to_string(id)] = std::move(list);
    }
    j["diagnostics"] = {{"sent_frames", report.totals.sent_frames},
                        {"dropped_no_recipient", report.totals.dropped_no_recipient},
                        {"private_tag_conflicts", report.totals.private_tag_conflicts},
                        {"dedup_suppressed", report.totals.dedup_suppressed},
                        {"evicted_peers", report.totals.evicted_peers}};
    return j.dump(2);
}

std::string MetricsReport::to_json() const {
    json j;
    j["mode"] = mode;
    if (mode == "objects") {
        j["object_count"] = object_count;
        if (baseline_sockets > 0) {
            j["baseline_sockets"] = baseline_sockets;
            j["baseline_note"] =
                "per-pattern socket count a Mangos realization of this scenario needs";
        }
    } else if (mode == "connections") {
        j["connections"] = connections;
        j["window_ms"] = window_ms;
    } else if (mode == "transfer") {
        j["messages"] = messages;
        j["transfer_ms"] = transfer_ms;
    }
    return j.dump(2);
}

MetricsReport bench_objects(const Scenario& s) {
    MetricsReport m;
    m.mode = "objects";
    transport::SimNet net({0});
    {
        std::vector<std::shared_ptr<Communicator>> comms;
        for (const auto& node : s.nodes) {
            CommunicatorConfig cfg;
            cfg.node_id = wire_id(node.id);
            cfg.listen = "sim:n" + std::to_string(node.id);
            comms.push_back(Communicator::create(cfg, net));
        }
        // One communicator binds one endpoint; the listen trace is the
        // object count, measured rather than assumed.
        m.object_count = net.listen_log().size();
        for (auto& comm : comms) comm->shutdown();
    }
    if (s.nodes.size() == 4) m.baseline_sockets = 12;
    return m;
}

MetricsReport bench_connections(std::uint32_t window_ms) {
    MetricsReport m;
    m.mode = "connections";
    m.window_ms = window_ms;
    transport::TcpTransport net;
    CommunicatorConfig root_cfg;
    root_cfg.node_id = 1;
    root_cfg.listen = "tcp:127.0.0.1:0";
    auto root = Communicator::create(root_cfg, net);

    std::vector<std::shared_ptr<Communicator>> dialers;
    auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(window_ms);
    NodeId next_id = 2;
    while (std::chrono::steady_clock::now() < deadline) {
        CommunicatorConfig cfg;
        cfg.node_id = next_id++;
        cfg.listen = "tcp:127.0.0.1:0";
        cfg.bootstrap = {root->listen_address()};
        dialers.push_back(Communicator::create(cfg, net));
        auto wait_until = std::chrono::steady_clock::now() + std::chrono::milliseconds(250);
        while (root->peers().size() < dialers.size() &&
               std::chrono::steady_clock::now() < std::min(deadline, wait_until)) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    }
    m.connections = root->peers().size();
    for (auto& d : dialers) d->shutdown();
    root->shutdown();
    return m;
}

MetricsReport bench_transfer(std::uint64_t n, std::uint64_t seed) {
    MetricsReport m;
    m.mode = "transfer";
    m.messages = n;

    transport::SimNet net({seed});
    CommunicatorConfig cfg1;
    cfg1.node_id = 1;
    cfg1.listen = "sim:a";
    auto sender = Communicator::create(cfg1, net);
    CommunicatorConfig cfg2;
    cfg2.node_id = 2;
    cfg2.listen = "sim:b";
    cfg2.bootstrap = {"sim:a"};
    auto receiver = Communicator::create(cfg2, net);
    receiver->subscribe("t");

    bool ok = net.run_until(
        [&]() { return sender->peers().size() == 1 && receiver->peers().size() == 1 &&
                       !sender->peers().begin()->second.subscriptions.empty(); },
        60000);
    if (!ok) throw Error(Errc::ConvergenceTimeout, "transfer bench pair did not converge");

    const std::pair<Mechanism, std::string> batches[] = {
        {Mechanism::Private, "t"},
        {Mechanism::Broadcast, ""},
        {Mechanism::GroupBroadcast, "t"},
        {Mechanism::Balance, "t"},
    };
    for (const auto& [mech, tag] : batches) {
        auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t k = 0; k < n; ++k) {
            sender->send(Message::text("m" + std::to_string(k), {{mech, tag}}));
        }
        std::uint64_t got = 0;
        net.run_until(
            [&]() {
                while (receiver->try_recv()) ++got;
                return got >= n;
            },
            // FIFO clamping spaces arrivals ~1 sim ms apart, so budget scales
            // with the batch size.
            10 * n + 1000);
        auto t1 = std::chrono::steady_clock::now();
        m.transfer_ms[std::string(mechanism_name(mech))] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    sender->shutdown();
    receiver->shutdown();
    return m;
}

}  // namespace equicom::harness
