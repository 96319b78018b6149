// Experiment driver: dataset synthesis and preparation, training,
// evaluation, ablation sweeps, embedding export. Every output file
// starts with the config-hash comment line so results stay traceable
// to the exact configuration that produced them.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <mcrec/config.hpp>
#include <mcrec/errors.hpp>
#include <mcrec/eval.hpp>
#include <mcrec/rng.hpp>
#include <mcrec/synthetic.hpp>
#include <mcrec/training.hpp>

namespace fs = std::filesystem;
using namespace mcrec;

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Deferred key=value overrides: file config first, flags on top.
struct ConfigCli {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file; flags override its keys");
    auto bind = [this, cmd](const char* flag, const char* key, const char* help) {
      cmd->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { overrides[key] = v; }, help);
    };
    bind("--interactions", "interactions", "user-item interactions file");
    bind("--kg", "kg", "knowledge graph triples file");
    bind("--out", "out", "output directory");
    bind("--separator", "separator", "field separator: empty=deduce, 'tab', or literal");
    bind("--rating-threshold", "rating_threshold", "ratings >= threshold count as positive");
    bind("--train-ratio", "train_ratio", "per-user train fraction in (0,1)");
    bind("--dim", "dim", "embedding dimension");
    bind("--manifolds", "manifolds", "number of constant-curvature subspaces");
    bind("--depth", "depth", "propagation rounds");
    bind("--sample-size", "sample_size", "receptive field size per entity");
    bind("--aggregator", "aggregator", "gcn | graphsage | neighbor");
    bind("--margin", "margin", "constant | geometry | hicf");
    bind("--margin-c", "margin_c", "margin offset c");
    bind("--leaky-slope", "leaky_slope", "LeakyReLU negative slope");
    bind("--taylor-eps", "taylor_eps", "near-zero curvature branch width");
    bind("--init-std", "init_std", "embedding init standard deviation");
    bind("--kappa-init", "kappa_init", "comma-separated initial curvatures");
    bind("--lr", "lr", "learning rate for embeddings and weights");
    bind("--lr-kappa", "lr_kappa", "learning rate for curvatures");
    bind("--batch", "batch", "pairs per SGD step");
    bind("--max-epochs", "max_epochs", "epoch cap");
    bind("--patience", "patience", "early-stopping patience in epochs");
    bind("--seed", "seed", "master seed");
    bind("--workers", "workers", "worker thread count");
    bind("--eval-negatives", "eval_negatives", "negatives per evaluated user");
  }

  RunConfig build() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    cfg.validate();
    return cfg;
  }
};

struct Dataset {
  Interactions inter;
  KnowledgeGraph kg;
  DataSplit split;
};

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.interactions.empty()) throw ContractError("no interactions file configured");
  if (cfg.kg.empty()) throw ContractError("no knowledge graph file configured");
  Dataset d;
  InteractionFormat fmt;
  fmt.separator = cfg.separator;
  fmt.rating_threshold = cfg.rating_threshold;
  d.inter = load_interactions(cfg.interactions, fmt);
  d.kg = load_kg(cfg.kg, d.inter.item_tokens);
  d.split = split_interactions(d.inter, cfg.train_ratio, cfg.train.seed);
  return d;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / name;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << cfg.hash_header() << "\n";
  return out;
}

void print_summary(const char* title, const EvalSummary& ev) {
  std::printf("%s over %d users\n", title, ev.users);
  std::printf("  %-8s %-10s %-10s\n", "k", "hr", "ndcg");
  for (const auto& [k, hr] : ev.hr) {
    std::printf("  %-8d %-10.4f %-10.4f\n", k, hr, ev.ndcg.at(k));
  }
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
  auto paths = write_synthetic_dataset(out_dir, spec);
  std::printf("wrote %s\n", paths.interactions.c_str());
  std::printf("wrote %s\n", paths.kg.c_str());
  std::printf("users=%d items=%d clusters=%d entities=%d seed=%llu\n", spec.users, spec.items,
              spec.clusters, spec.items + spec.attribute_entities,
              static_cast<unsigned long long>(spec.seed));
  return 0;
}

int cmd_prepare(const RunConfig& cfg) {
  Dataset d = load_dataset(cfg);

  auto write_pairs = [&](const char* name, const std::vector<std::vector<int>>& rows) {
    auto out = open_output(cfg, name);
    out << "user_id\titem_id\n";
    for (std::size_t u = 0; u < rows.size(); ++u) {
      for (int item : rows[u]) out << u << "\t" << item << "\n";
    }
  };
  write_pairs("train.tsv", d.split.train);
  write_pairs("test.tsv", d.split.test);

  auto write_map = [&](const char* name, const std::vector<std::string>& tokens) {
    auto out = open_output(cfg, name);
    out << "id\ttoken\n";
    for (std::size_t i = 0; i < tokens.size(); ++i) out << i << "\t" << tokens[i] << "\n";
  };
  write_map("user_map.tsv", d.inter.user_tokens);
  write_map("entity_map.tsv", d.kg.entity_tokens);
  write_map("relation_map.tsv", d.kg.relation_tokens);

  long train_pairs = 0, test_pairs = 0;
  for (const auto& v : d.split.train) train_pairs += static_cast<long>(v.size());
  for (const auto& v : d.split.test) test_pairs += static_cast<long>(v.size());
  std::printf("%s\n", cfg.hash_header().c_str());
  std::printf("users=%d items=%d entities=%d relations=%d train_pairs=%ld test_pairs=%ld\n",
              d.split.user_count, d.split.item_count, d.kg.entity_count, d.kg.relation_count(),
              train_pairs, test_pairs);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  Dataset d = load_dataset(cfg);
  std::printf("%s\n", cfg.hash_header().c_str());
  ModelState model = ModelState::init(cfg.model, d.split.user_count, d.kg.entity_count,
                                      d.kg.relation_count(), cfg.train.seed);
  TrainResult res = train_model(std::move(model), d.split, d.kg, cfg.train, &std::cout);

  fs::create_directories(cfg.out);
  const std::string metrics = (fs::path(cfg.out) / "metrics.csv").string();
  const std::string ckpt = (fs::path(cfg.out) / "checkpoint.bin").string();
  write_metric_log(metrics, res.log, cfg.hash());
  save_checkpoint(ckpt, res.best, cfg.hash());

  const EpochRecord& best = res.log[static_cast<std::size_t>(res.best_epoch) - 1];
  std::printf("best epoch %d: hr@10 %.4f hr@20 %.4f ndcg@10 %.4f ndcg@20 %.4f\n", res.best_epoch,
              best.hr10, best.hr20, best.ndcg10, best.ndcg20);
  std::printf("wrote %s\n", metrics.c_str());
  std::printf("wrote %s\n", ckpt.c_str());
  return 0;
}

LoadedCheckpoint load_compatible(const std::string& path, const Dataset& d) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (ck.model.user_count != d.split.user_count || ck.model.entity_count != d.kg.entity_count ||
      ck.model.relation_count != d.kg.relation_count()) {
    throw CheckpointError("checkpoint shape (" + std::to_string(ck.model.user_count) + " users, " +
                          std::to_string(ck.model.entity_count) + " entities, " +
                          std::to_string(ck.model.relation_count) +
                          " relations) does not match the configured dataset");
  }
  return ck;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
  Dataset d = load_dataset(cfg);
  LoadedCheckpoint ck = load_compatible(checkpoint, d);
  const NeighborTable nt = build_neighbor_table(d.kg, ck.model.cfg.sample_size,
                                                mix64(cfg.train.seed, "eval-neigh"));
  EvalSummary ev = evaluate_model(ck.model, d.split, d.kg, nt, cfg.train.seed, {10, 20},
                                  cfg.train.workers, cfg.train.eval_negatives);

  auto out = open_output(cfg, "eval.csv");
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(ck.config_hash));
  out << "# checkpoint_config_hash=" << hex << "\n";
  out << "hr@10,hr@20,ndcg@10,ndcg@20,users\n";
  out << g17(ev.hr.at(10)) << "," << g17(ev.hr.at(20)) << "," << g17(ev.ndcg.at(10)) << ","
      << g17(ev.ndcg.at(20)) << "," << ev.users << "\n";

  std::printf("%s\n", cfg.hash_header().c_str());
  print_summary("test ranking", ev);
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& axis) {
  Dataset d = load_dataset(cfg);
  std::printf("%s\n", cfg.hash_header().c_str());

  struct Cell {
    std::string label_a, label_b;
    double hr20 = 0.0, ndcg20 = 0.0;
    int best_epoch = 0;
    std::string status = "ok";
  };
  std::vector<Cell> cells;
  auto run_cell = [&](Cell cell, const ModelConfig& mc) {
    try {
      mc.validate();
      ModelState model = ModelState::init(mc, d.split.user_count, d.kg.entity_count,
                                          d.kg.relation_count(), cfg.train.seed);
      TrainResult res = train_model(std::move(model), d.split, d.kg, cfg.train, nullptr);
      cell.hr20 = res.best_hr20;
      cell.ndcg20 = res.best_ndcg20;
      cell.best_epoch = res.best_epoch;
    } catch (const std::exception& e) {
      cell.status = std::string("error: ") + e.what();
    }
    std::printf("  %-10s %-10s hr@20 %-8.4f ndcg@20 %-8.4f %s\n", cell.label_a.c_str(),
                cell.label_b.c_str(), cell.hr20, cell.ndcg20, cell.status.c_str());
    std::fflush(stdout);
    cells.push_back(std::move(cell));
  };

  std::string head_a, head_b;
  if (axis == "grid") {
    head_a = "aggregator";
    head_b = "margin";
    for (auto agg : {AggregatorKind::Gcn, AggregatorKind::GraphSage, AggregatorKind::Neighbor}) {
      for (auto margin :
           {MarginKind::Constant, MarginKind::Hicf, MarginKind::GeometryAware}) {
        ModelConfig mc = cfg.model;
        mc.aggregator = agg;
        mc.margin = margin;
        run_cell({to_string(agg), to_string(margin)}, mc);
      }
    }
  } else if (axis == "depth") {
    head_a = "depth";
    head_b = "-";
    for (int depth : {1, 2, 3}) {
      ModelConfig mc = cfg.model;
      mc.depth = depth;
      run_cell({std::to_string(depth), "-"}, mc);
    }
  } else if (axis == "manifolds") {
    head_a = "manifolds";
    head_b = "-";
    for (int m : {1, 2, 3, 4}) {
      ModelConfig mc = cfg.model;
      mc.manifolds = m;
      mc.kappa_init.clear();  // default spread; arity follows the sweep
      run_cell({std::to_string(m), "-"}, mc);
    }
  } else {
    throw ContractError("unknown ablation axis: " + axis);
  }

  auto out = open_output(cfg, "ablation_" + axis + ".csv");
  out << head_a << "," << head_b << ",hr@20,ndcg@20,best_epoch,status\n";
  for (const auto& c : cells) {
    out << c.label_a << "," << c.label_b << "," << g17(c.hr20) << "," << g17(c.ndcg20) << ","
        << c.best_epoch << ",\"" << c.status << "\"\n";
  }
  std::printf("wrote %s\n", (fs::path(cfg.out) / ("ablation_" + axis + ".csv")).c_str());
  return 0;
}

int cmd_export(const RunConfig& cfg, const std::string& checkpoint) {
  Dataset d = load_dataset(cfg);
  LoadedCheckpoint ck = load_compatible(checkpoint, d);
  const ModelState& model = ck.model;

  // Train-set popularity tertiles: low third, middle third, top third.
  std::vector<long> pop(static_cast<std::size_t>(d.split.item_count), 0);
  for (const auto& items : d.split.train) {
    for (int item : items) ++pop[static_cast<std::size_t>(item)];
  }
  std::vector<int> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pop[a] != pop[b] ? pop[a] < pop[b] : a < b; });
  std::vector<const char*> tertile(pop.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const char* label = r * 3 < order.size()       ? "low"
                        : r * 3 < 2 * order.size() ? "mid"
                                                   : "high";
    tertile[static_cast<std::size_t>(order[r])] = label;
  }

  auto out = open_output(cfg, "embeddings.tsv");
  out << "item_id\ttoken\ttertile";
  for (int m = 0; m < model.cfg.manifolds; ++m) {
    for (int j = 0; j < model.cfg.dim; ++j) out << "\ts" << m << "_d" << j;
  }
  out << "\n";
  for (int item = 0; item < d.split.item_count; ++item) {
    out << item << "\t" << d.kg.entity_tokens[static_cast<std::size_t>(item)] << "\t"
        << tertile[static_cast<std::size_t>(item)];
    for (int m = 0; m < model.cfg.manifolds; ++m) {
      const auto& s = model.sub[static_cast<std::size_t>(m)];
      Eigen::VectorXd row = s.entity_emb.row(item).transpose();
      Eigen::VectorXd point = kops::project_to_domain(
          kops::exp_map_origin(row, s.kappa, model.cfg.taylor_eps), s.kappa);
      for (int j = 0; j < point.size(); ++j) out << "\t" << g17(point[j]);
    }
    out << "\n";
  }
  std::printf("%s\n", cfg.hash_header().c_str());
  std::printf("wrote %s (%d items)\n", (fs::path(cfg.out) / "embeddings.tsv").c_str(),
              d.split.item_count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-curvature knowledge-graph recommender"};
  app.require_subcommand(1);

  // synth
  SyntheticSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic clustered dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--users", spec.users, "user count");
  synth->add_option("--items", spec.items, "item count");
  synth->add_option("--clusters", spec.clusters, "planted cluster count");
  synth->add_option("--attribute-entities", spec.attribute_entities, "non-item entity count");
  synth->add_option("--positives-per-user", spec.positives_per_user, "positives per user");
  synth->add_option("--in-cluster-prob", spec.in_cluster_prob, "in-cluster pick probability");
  synth->add_option("--noise-edges-per-item", spec.noise_edges_per_item, "noise edges per item");
  synth->add_option("--seed", spec.seed, "generator seed");

  ConfigCli prep_cli, train_cli, eval_cli, ablate_cli, export_cli;
  auto* prepare = app.add_subcommand("prepare", "materialize splits and id maps");
  prep_cli.attach(prepare);

  auto* train = app.add_subcommand("train", "train and write metrics.csv + checkpoint.bin");
  train_cli.attach(train);

  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_cli.attach(eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

  std::string axis = "grid";
  auto* ablate = app.add_subcommand("ablate", "sweep aggregator x margin, depth, or manifolds");
  ablate_cli.attach(ablate);
  ablate->add_option("--axis", axis, "grid | depth | manifolds");

  std::string export_ckpt;
  auto* exporter = app.add_subcommand("export-embeddings",
                                      "per-item manifold coordinates with popularity tertiles");
  export_cli.attach(exporter);
  exporter->add_option("--checkpoint", export_ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (prepare->parsed()) return cmd_prepare(prep_cli.build());
    if (train->parsed()) return cmd_train(train_cli.build());
    if (eval->parsed()) return cmd_eval(eval_cli.build(), eval_ckpt);
    if (ablate->parsed()) return cmd_ablate(ablate_cli.build(), axis);
    if (exporter->parsed()) return cmd_export(export_cli.build(), export_ckpt);
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
