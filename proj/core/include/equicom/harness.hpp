#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "equicom/communicator.hpp"
#include "equicom/routing.hpp"
#include "equicom/types.hpp"

namespace equicom::harness {

// Scenario files speak in small 0-based node ids; on the wire those become
// NodeId = id + 1, since 0 is reserved. The shift is monotone, so every
// lowest-id and round-robin rule reads the same in both numberings, and
// reports translate back.
inline NodeId wire_id(std::uint64_t scenario_id) { return scenario_id + 1; }
inline std::uint64_t scenario_id(NodeId wire) { return wire - 1; }

struct ScenarioNode {
    std::uint64_t id = 0;
    std::vector<std::string> subscribe;
};

struct SendEvent {
    std::uint64_t node = 0;
    std::vector<routing::RoutingDirective> directives;
    std::string payload;
};

struct ScenarioEvent {
    enum class Kind { AwaitConvergence, Send, Quiesce };
    Kind kind = Kind::Quiesce;
    SendEvent send;  // meaningful only for Kind::Send
};

struct Scenario {
    std::vector<ScenarioNode> nodes;
    std::vector<ScenarioEvent> events;
};

// Throws Error{ParseError} (bad JSON / wrong types, message names the
// offending field) or Error{ValidationError} (duplicate node ids, send from
// an undeclared node, unknown mechanism name).
Scenario parse_scenario(const std::string& text, const std::string& origin);
Scenario load_scenario(const std::string& path);

struct ReportEntry {
    std::uint64_t sender = 0;  // scenario id; absent (=0 with no meaning) in golden files
    std::uint64_t seq = 0;
    Mechanism mechanism = Mechanism::Broadcast;
    std::string tag;
    std::string payload;

    bool operator==(const ReportEntry&) const = default;
};

struct GoldenReport {
    // scenario node id -> deliveries in normalized order (stable-sorted by
    // sender, per-sender arrival order preserved).
    std::map<std::uint64_t, std::vector<ReportEntry>> deliveries;
    Diagnostics totals;  // summed over all nodes

    bool operator==(const GoldenReport& other) const { return deliveries == other.deliveries; }
};

struct RunOptions {
    std::uint64_t seed = 0;
    std::string transport = "sim";          // "sim" | "tcp"
    std::size_t bootstrap_root = 0;         // index into scenario.nodes of the star center
    std::uint64_t convergence_budget_ms = 60000;  // sim ms (sim) or wall ms (tcp)
};

// Creates one communicator per node (bootstrap star to the root), applies
// subscriptions, replays the events, and collects every delivery. Throws
// Error{ConvergenceTimeout} if an await_convergence event expires.
GoldenReport run_scenario(const Scenario& s, const RunOptions& opts);

struct DiffResult {
    bool pass = false;
    std::string detail;  // empty on pass; names node + index on the first divergence
};

// Compares (mechanism, tag, payload) lists per node; a node absent on either
// side counts as an empty list. Sender/seq are run-side bookkeeping and stay
// out of the comparison.
DiffResult diff_reports(const GoldenReport& actual, const GoldenReport& expected);
DiffResult diff_golden(const GoldenReport& actual, const std::string& expected_path);

GoldenReport parse_golden(const std::string& text, const std::string& origin);
GoldenReport load_golden(const std::string& path);
std::string report_to_json(const GoldenReport& report);

struct MetricsReport {
    std::string mode;
    // objects
    std::uint64_t object_count = 0;
    std::uint64_t baseline_sockets = 0;  // reference per-pattern-socket figure, when known
    // connections
    std::uint64_t connections = 0;
    std::uint64_t window_ms = 0;
    // transfer
    std::uint64_t messages = 0;
    std::map<std::string, double> transfer_ms;  // mechanism name -> elapsed wall ms

    std::string to_json() const;
};

// objects: how many messaging objects the scenario needs here (one
// communicator per node, nothing else). The 4-node reference scenario also
// reports the 12-socket figure a per-pattern-socket library needs for the
// same topology, as the comparison baseline.
MetricsReport bench_objects(const Scenario& s);

// connections: handshakes completed against one tcp listener within a
// wall-clock window.
MetricsReport bench_connections(std::uint32_t window_ms);

// transfer: wall time to deliver n messages per mechanism, 2 nodes over sim.
MetricsReport bench_transfer(std::uint64_t n, std::uint64_t seed);

}  // namespace equicom::harness
