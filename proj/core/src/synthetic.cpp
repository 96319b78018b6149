#include "mcrec/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "mcrec/errors.hpp"
#include "mcrec/rng.hpp"

namespace mcrec {

SyntheticPaths write_synthetic_dataset(const std::string& dir, const SyntheticSpec& spec) {
  if (spec.users < 1 || spec.items < 1 || spec.clusters < 1 ||
      spec.clusters > spec.items || spec.attribute_entities < spec.clusters ||
      spec.positives_per_user < 1 || spec.positives_per_user > spec.items ||
      !(spec.in_cluster_prob >= 0.0 && spec.in_cluster_prob <= 1.0)) {
    throw ContractError("write_synthetic_dataset: inconsistent spec");
  }
  std::filesystem::create_directories(dir);
  SyntheticPaths paths;
  paths.interactions = (std::filesystem::path(dir) / "interactions.tsv").string();
  paths.kg = (std::filesystem::path(dir) / "kg.tsv").string();

  std::vector<std::vector<int>> cluster_items(static_cast<std::size_t>(spec.clusters));
  for (int i = 0; i < spec.items; ++i) {
    cluster_items[static_cast<std::size_t>(i % spec.clusters)].push_back(i);
  }

  {
    std::ofstream out(paths.interactions, std::ios::trunc);
    if (!out) throw IoError("cannot write " + paths.interactions);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> any_item(0, spec.items - 1);
    for (int u = 0; u < spec.users; ++u) {
      auto rng = make_rng(mix64(spec.seed, "user", static_cast<std::uint64_t>(u)));
      const auto& own = cluster_items[static_cast<std::size_t>(u % spec.clusters)];
      std::uniform_int_distribution<std::size_t> own_item(0, own.size() - 1);
      std::set<int> chosen;
      int attempts = 0;
      const int max_attempts = 200 * spec.positives_per_user;
      while (static_cast<int>(chosen.size()) < spec.positives_per_user &&
             attempts < max_attempts) {
        ++attempts;
        const int item =
            unit(rng) < spec.in_cluster_prob ? own[own_item(rng)] : any_item(rng);
        chosen.insert(item);
      }
      // Pathological specs may exhaust the cluster; fill deterministically.
      for (int i = 0; static_cast<int>(chosen.size()) < spec.positives_per_user; ++i) {
        chosen.insert(i % spec.items);
      }
      for (int item : chosen) out << 'u' << u << '\t' << 'i' << item << '\t' << 5 << '\n';
    }
    if (!out) throw IoError("failed writing " + paths.interactions);
  }

  {
    std::ofstream out(paths.kg, std::ios::trunc);
    if (!out) throw IoError("cannot write " + paths.kg);
    const int misc = spec.attribute_entities - spec.clusters;
    for (int i = 0; i < spec.items; ++i) {
      out << 'i' << i << "\tgenre\thub" << (i % spec.clusters) << '\n';
      for (int j = 0; j < spec.noise_edges_per_item && misc > 0; ++j) {
        const int target = (i * spec.noise_edges_per_item + j) % misc;
        out << 'i' << i << "\trelated\tmisc" << target << '\n';
      }
    }
    if (!out) throw IoError("failed writing " + paths.kg);
  }
  return paths;
}

}  // namespace mcrec
