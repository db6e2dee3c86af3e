#pragma once

// Flat "key = value" experiment configuration. Keys may carry dotted section
// prefixes ("fig1.degree"); '#' starts a comment. Every lookup records the
// value actually used (given or default), so the resolved copy written next
// to the outputs reproduces the run on its own.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace polytransfer::config {

class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Comma-separated list.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback);

  // Keys present in the file that were never looked up.
  std::vector<std::string> unused_keys() const;
  // Throws InvalidArgument naming every unknown key.
  void reject_unknown() const;

  // Every looked-up key with the value used, sorted.
  void write_resolved(std::ostream& out) const;

 private:
  std::string lookup(const std::string& key, const std::string& fallback);
  [[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) const;

  std::string source_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
};

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace polytransfer::config
