#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "user/model/config.hpp"
#include "user/synth/generator.hpp"
#include "user/train/dataset.hpp"
#include "user/train/trainer.hpp"

namespace user {

/// Flat `key = value` configuration with a fixed, typed key set. Values from
/// a file are overridden by later `set` calls (command-line flags).
class RunConfig {
 public:
  RunConfig();

  /// Reads `key = value` lines; `#` starts a comment. Unknown keys and
  /// malformed values throw ConfigError naming the line.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// Parses `key=value`.
  void set_assignment(const std::string& kv);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Every key with its effective value, one `key = value` line each.
  std::string echo() const;
  void write_echo(const std::filesystem::path& dir) const;

  ModelConfig model() const;
  TrainConfig pretrain() const;
  TrainConfig finetune() const;
  WorldConfig world() const;
  PrepareOptions prepare() const;

  static std::vector<std::string> keys();

 private:
  enum class Type { Int, UInt, Real, Text };
  struct Entry {
    Type type;
    std::string value;
    std::string help;
  };
  void check(const std::string& key, const std::string& value) const;

  std::map<std::string, Entry> entries_;
};

}  // namespace user
