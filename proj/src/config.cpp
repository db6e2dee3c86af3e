#include "polytransfer/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "polytransfer/error.hpp"

namespace polytransfer::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  return true;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_real(const std::string& text, double& out) {
  if (text == "inf" || text == "+inf") { out = INFINITY; return true; }
  if (text == "-inf") { out = -INFINITY; return true; }
  return parse_number(text, out);
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw InvalidArgument(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw InvalidArgument(where + ": malformed key '" + key + "'");
    if (cfg.values_.count(key)) throw InvalidArgument(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw InvalidArgument("malformed key '" + key + "'");
  values_[key] = value;
}

std::string Config::lookup(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  const std::string value = it == values_.end() ? fallback : it->second;
  resolved_[key] = value;
  return value;
}

void Config::bad_value(const std::string& key, const std::string& value, const char* expected) const {
  throw InvalidArgument(source_ + ": key '" + key + "' has value '" + value + "', expected " + expected);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) { return lookup(key, fallback); }

std::string Config::require_string(const std::string& key) {
  if (!has(key)) throw InvalidArgument(source_ + ": missing required key '" + key + "'");
  return lookup(key, {});
}

double Config::get_double(const std::string& key, double fallback) {
  const std::string text = lookup(key, format_double(fallback));
  double v;
  if (!parse_real(text, v) || std::isnan(v)) bad_value(key, text, "a real number");
  return v;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) {
  const std::string text = lookup(key, std::to_string(fallback));
  std::int64_t v;
  if (!parse_number(text, v)) bad_value(key, text, "an integer");
  return v;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) {
  const std::string text = lookup(key, std::to_string(fallback));
  std::size_t v;
  if (!parse_number(text, v)) bad_value(key, text, "a nonnegative integer");
  return v;
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) {
  const std::string text = lookup(key, std::to_string(fallback));
  std::uint64_t v;
  if (!parse_number(text, v)) bad_value(key, text, "an unsigned 64-bit integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const std::string text = lookup(key, fallback ? "true" : "false");
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  bad_value(key, text, "true or false");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  std::string joined;
  for (std::size_t i = 0; i < fallback.size(); ++i) joined += (i ? ", " : "") + format_double(fallback[i]);
  const std::string text = lookup(key, joined);
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    double v;
    if (!parse_real(item, v) || std::isnan(v)) bad_value(key, text, "a comma-separated list of reals");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, text, "a nonempty list");
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
  std::string joined;
  for (std::size_t i = 0; i < fallback.size(); ++i) joined += (i ? ", " : "") + std::to_string(fallback[i]);
  const std::string text = lookup(key, joined);
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) {
    std::size_t v;
    if (!parse_number(item, v)) bad_value(key, text, "a comma-separated list of nonnegative integers");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, text, "a nonempty list");
  return out;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_)
    if (!resolved_.count(key)) out.push_back(key);
  return out;
}

void Config::reject_unknown() const {
  const auto unused = unused_keys();
  if (unused.empty()) return;
  std::string msg = source_ + ": unknown key";
  msg += unused.size() > 1 ? "s" : "";
  for (std::size_t i = 0; i < unused.size(); ++i) msg += (i ? ", '" : " '") + unused[i] + "'";
  throw InvalidArgument(msg);
}

void Config::write_resolved(std::ostream& out) const {
  for (const auto& [key, value] : resolved_) out << key << " = " << value << '\n';
}

}  // namespace polytransfer::config
