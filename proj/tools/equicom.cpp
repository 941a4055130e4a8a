// equicom CLI: replay scenarios, take measurements, or run one live node.
#include <atomic>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "equicom/communicator.hpp"
#include "equicom/errors.hpp"
#include "equicom/harness.hpp"
#include "equicom/tcp_transport.hpp"
#include "equicom/transport.hpp"
#include "equicom/types.hpp"

namespace {

int do_run(const std::string& scenario_path, std::uint64_t seed, const std::string& transport,
           const std::string& golden_path) {
    auto scenario = equicom::harness::load_scenario(scenario_path);
    equicom::harness::RunOptions opts;
    opts.seed = seed;
    opts.transport = transport;
    auto report = equicom::harness::run_scenario(scenario, opts);
    std::cout << equicom::harness::report_to_json(report) << "\n";
    if (!golden_path.empty()) {
        auto diff = equicom::harness::diff_golden(report, golden_path);
        if (!diff.pass) {
            std::cerr << "golden mismatch: " << diff.detail << "\n";
            return 1;
        }
        std::cerr << "golden match\n";
    }
    return 0;
}

int do_bench(const std::string& mode, const std::string& scenario_path, std::uint64_t n,
             std::uint32_t window_ms, std::uint64_t seed) {
    equicom::harness::MetricsReport m;
    if (mode == "objects") {
        if (scenario_path.empty()) {
            std::cerr << "--mode objects requires --scenario\n";
            return 2;
        }
        m = equicom::harness::bench_objects(equicom::harness::load_scenario(scenario_path));
    } else if (mode == "connections") {
        m = equicom::harness::bench_connections(window_ms);
    } else {
        m = equicom::harness::bench_transfer(n, seed);
    }
    std::cout << m.to_json() << "\n";
    return 0;
}

int do_node(const std::string& listen, std::uint64_t id,
            const std::vector<std::string>& bootstrap, const std::vector<std::string>& subs) {
    auto addr = equicom::transport::parse_address(listen);
    if (addr.scheme != "tcp") {
        // The sim scheme lives inside a single process; a standalone node has
        // nobody to share it with.
        std::cerr << "node mode needs a tcp listen address, e.g. tcp:127.0.0.1:7001\n";
        return 2;
    }
    equicom::transport::TcpTransport net;
    equicom::CommunicatorConfig cfg;
    cfg.node_id = id;
    cfg.listen = listen;
    cfg.bootstrap = bootstrap;
    auto comm = equicom::Communicator::create(cfg, net);
    for (const auto& tag : subs) comm->subscribe(tag);
    std::cerr << "node " << id << " listening on " << comm->listen_address() << "\n";

    std::thread receiver([&]() {
        while (auto d = comm->recv()) {
            std::cout << "Received: " << d->text() << "\n" << std::flush;
        }
    });

    std::string line;
    while (std::getline(std::cin, line)) {
        std::istringstream iss(line);
        std::string cmd;
        iss >> cmd;
        if (cmd.empty()) continue;
        if (cmd == "quit" || cmd == "exit") break;
        if (cmd == "peers") {
            for (const auto& [pid, rec] : comm->peers()) {
                std::cerr << "  " << pid << " @ " << rec.addr << " (" << rec.subscriptions.size()
                          << " subs)\n";
            }
            continue;
        }
        if (cmd == "subscribe" || cmd == "unsubscribe") {
            std::string tag;
            iss >> tag;
            if (tag == "-") tag.clear();
            try {
                if (cmd == "subscribe") {
                    comm->subscribe(tag);
                } else {
                    comm->unsubscribe(tag);
                }
            } catch (const equicom::Error& e) {
                std::cerr << "error: " << e.what() << "\n";
            }
            continue;
        }
        if (cmd != "send") {
            std::cerr << "commands: send <mechanism> <tag> <text> | subscribe <tag> | peers | quit"
                         " ('-' stands for the empty tag)\n";
            continue;
        }
        std::string mech_name, tag, text;
        iss >> mech_name >> tag;
        std::getline(iss, text);
        if (!text.empty() && text.front() == ' ') text.erase(0, 1);
        auto mech = equicom::mechanism_from_name(mech_name);
        if (!mech) {
            std::cerr << "unknown mechanism \"" << mech_name
                      << "\" (private|broadcast|group_broadcast|balance)\n";
            continue;
        }
        if (tag == "-") tag.clear();
        try {
            auto receipt =
                comm->send(equicom::Message::text(text, {{*mech, tag}}));
            std::cerr << "-> " << receipt.recipients << " recipient(s)\n";
        } catch (const equicom::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
        }
    }

    comm->shutdown();
    receiver.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"equicom: one communicator, one port, every delivery mechanism"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Replay a scenario and print its delivery report");
    std::string scenario_path;
    std::uint64_t seed = 0;
    std::string transport = "sim";
    std::string golden_path;
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--seed", seed, "deterministic seed (sim transport)");
    run->add_option("--transport", transport, "sim | tcp")
        ->check(CLI::IsMember({"sim", "tcp"}));
    run->add_option("--golden", golden_path, "expected report; exit 0 iff the run matches it");

    auto* bench = app.add_subcommand("bench", "Measure footprint or throughput");
    std::string mode;
    std::string bench_scenario;
    std::uint64_t n = 1000;
    std::uint32_t window_ms = 1000;
    std::uint64_t bench_seed = 0;
    bench->add_option("--mode", mode, "objects | connections | transfer")
        ->required()
        ->check(CLI::IsMember({"objects", "connections", "transfer"}));
    bench->add_option("--scenario", bench_scenario, "scenario JSON file (objects mode)");
    bench->add_option("--n", n, "messages per mechanism (transfer mode)");
    bench->add_option("--window-ms", window_ms, "measurement window (connections mode)");
    bench->add_option("--seed", bench_seed, "deterministic seed (transfer mode)");

    auto* node = app.add_subcommand("node", "Run one interactive node");
    std::string listen;
    std::uint64_t id = 0;
    std::vector<std::string> bootstrap;
    std::vector<std::string> subs;
    node->add_option("--listen", listen, "tcp listen address (port 0 = ephemeral)")->required();
    node->add_option("--id", id, "node id (nonzero)")->required();
    node->add_option("--bootstrap", bootstrap, "peer address to dial at startup");
    node->add_option("--subscribe", subs, "tag to subscribe at startup");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(scenario_path, seed, transport, golden_path);
        if (bench->parsed()) return do_bench(mode, bench_scenario, n, window_ms, bench_seed);
        if (node->parsed()) return do_node(listen, id, bootstrap, subs);
    } catch (const equicom::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
