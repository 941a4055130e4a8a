#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "equicom/communicator.hpp"
#include "equicom/routing.hpp"
#include "equicom/sim_net.hpp"
#include "equicom/wire.hpp"

using namespace equicom;

namespace {

wire::Frame sample_data_frame(std::size_t payload_len) {
    wire::DataBody body;
    body.sender = 42;
    body.seq = 1234567;
    body.mechanism = Mechanism::GroupBroadcast;
    body.tag = "cluster2";
    body.payload.assign(payload_len, 0xAB);
    return wire::Frame::data(std::move(body));
}

void bm_encode_data(benchmark::State& state) {
    auto frame = sample_data_frame(std::size_t(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(wire::encode_frame(frame));
    }
    state.SetBytesProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(bm_encode_data)->Arg(16)->Arg(256)->Arg(4096);

void bm_decode_data(benchmark::State& state) {
    auto bytes = wire::encode_frame(sample_data_frame(std::size_t(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(wire::decode_frame(bytes));
    }
    state.SetBytesProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(bm_decode_data)->Arg(16)->Arg(256)->Arg(4096);

void bm_resolve_recipients(benchmark::State& state) {
    const int n = int(state.range(0));
    PortMappingTable table;
    std::mt19937_64 rng(7);
    const std::vector<std::string> tags = {"p1", "cluster1", "cluster2", "c2t"};
    for (int i = 1; i <= n; ++i) {
        PeerRecord rec;
        rec.id = NodeId(i);
        rec.addr = "sim:" + std::to_string(i);
        rec.subscriptions.insert(tags[rng() % tags.size()]);
        rec.subscriptions.insert(tags[rng() % tags.size()]);
        table[rec.id] = rec;
    }
    auto subs = routing::subscription_view(table);
    routing::RoundRobinState rr;
    const std::vector<routing::RoutingDirective> directives = {
        {Mechanism::GroupBroadcast, "cluster2"},
        {Mechanism::Balance, "c2t"},
        {Mechanism::Private, "p1"},
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(routing::resolve_recipients(directives, table, subs, rr, 1));
    }
}
BENCHMARK(bm_resolve_recipients)->Arg(4)->Arg(16)->Arg(64);

// End-to-end cost of one broadcast delivered to one peer over the simulated
// transport, including the event loop.
void bm_sim_roundtrip(benchmark::State& state) {
    transport::SimNet net({1});
    CommunicatorConfig a_cfg;
    a_cfg.node_id = 1;
    a_cfg.listen = "sim:a";
    auto a = Communicator::create(a_cfg, net);
    CommunicatorConfig b_cfg;
    b_cfg.node_id = 2;
    b_cfg.listen = "sim:b";
    b_cfg.bootstrap = {"sim:a"};
    auto b = Communicator::create(b_cfg, net);
    net.run_until([&] { return a->peers().size() == 1 && b->peers().size() == 1; }, 10000);

    for (auto _ : state) {
        a->send(Message::text("x", {{Mechanism::Broadcast, ""}}));
        while (!b->try_recv()) net.step();
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()));
}
BENCHMARK(bm_sim_roundtrip);

}  // namespace

BENCHMARK_MAIN();
