#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>

#include <mcrec/rng.hpp>
#include <mcrec/training.hpp>

// Record/replay cost of the taped forward and the reverse sweep on a
// realistic sample: d = 32, three subspaces, depth 2, receptive
// field 8.

namespace {

struct Fixture {
  mcrec::KnowledgeGraph kg;
  mcrec::ModelState model;
  mcrec::NeighborTable nt;

  Fixture() {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mcrec_bench";
    fs::create_directories(dir);
    fs::path p = dir / "kg.tsv";
    std::ofstream out(p, std::ios::trunc);
    std::vector<std::string> items;
    for (int i = 0; i < 60; ++i) items.push_back("i" + std::to_string(i));
    for (int i = 0; i < 60; ++i) {
      out << "i" << i << "\tgenre\thub" << (i % 6) << "\n";
      out << "i" << i << "\ttag\tt" << (i % 17) << "\n";
    }
    out.close();
    kg = mcrec::load_kg(p.string(), items);

    mcrec::ModelConfig cfg;
    cfg.dim = 32;
    cfg.manifolds = 3;
    cfg.depth = 2;
    cfg.sample_size = 8;
    model = mcrec::ModelState::init(cfg, 16, kg.entity_count, kg.relation_count(), 3);
    nt = mcrec::build_neighbor_table(kg, 8, 3);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void bm_taped_forward(benchmark::State& state) {
  auto& f = fixture();
  mcrec::TrainTriple t{2, 5, 40};
  mcrec::Tape tape;
  for (auto _ : state) {
    tape.clear();
    mcrec::TapedCtx ctx(f.model, tape);
    mcrec::ModelForward<mcrec::TapedCtx> fwd(ctx, f.kg, f.nt);
    benchmark::DoNotOptimize(
        sample_loss(fwd, t, f.model.cfg.margin, f.model.cfg.margin_c));
  }
  state.counters["nodes"] = static_cast<double>(tape.node_count());
}

void bm_taped_forward_backward(benchmark::State& state) {
  auto& f = fixture();
  mcrec::TrainTriple t{2, 5, 40};
  mcrec::Tape tape;
  for (auto _ : state) {
    tape.clear();
    mcrec::TapedCtx ctx(f.model, tape);
    mcrec::ModelForward<mcrec::TapedCtx> fwd(ctx, f.kg, f.nt);
    mcrec::Var loss = sample_loss(fwd, t, f.model.cfg.margin, f.model.cfg.margin_c);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.has_adjoints());
  }
}

void bm_eager_forward(benchmark::State& state) {
  auto& f = fixture();
  mcrec::TrainTriple t{2, 5, 40};
  for (auto _ : state) {
    mcrec::EagerCtx ctx(f.model);
    mcrec::ModelForward<mcrec::EagerCtx> fwd(ctx, f.kg, f.nt);
    benchmark::DoNotOptimize(
        sample_loss(fwd, t, f.model.cfg.margin, f.model.cfg.margin_c));
  }
}

}  // namespace

BENCHMARK(bm_taped_forward);
BENCHMARK(bm_taped_forward_backward);
BENCHMARK(bm_eager_forward);

BENCHMARK_MAIN();
