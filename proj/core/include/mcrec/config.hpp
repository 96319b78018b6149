#pragma once

#include <cstdint>
#include <string>

#include "mcrec/model.hpp"
#include "mcrec/training.hpp"

namespace mcrec {

// One flat run description: data sources, model shape, optimizer
// knobs. Populated from a key=value file and/or CLI flag overrides;
// each knob has exactly one spelling.
struct RunConfig {
  std::string interactions;
  std::string kg;
  std::string out = "out";
  // "", "tab", "::" or any literal string; empty = deduce from the
  // interactions file name.
  std::string separator;
  double rating_threshold = 0.0;
  double train_ratio = 0.7;
  ModelConfig model;
  TrainOptions train;

  // Applies one key. Unknown keys and unparsable values raise
  // ParseError.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Every key in sorted order with normalized values; two configs
  // producing the same behavior hash identically.
  std::string canonical() const;
  std::uint64_t hash() const;
  // "# config_hash=<16 hex digits>", stamped on every output file.
  std::string hash_header() const;
};

// key=value lines; blank lines and '#' comments ignored.
RunConfig load_config(const std::string& path);

}  // namespace mcrec
