#include "liouville/config.hpp"

#include <fstream>
#include <sstream>

namespace liouville {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string label(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

double parse_number(const std::string& value, const std::string& where) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(value.substr(used)) != "") throw ValidationError("config field " + where + ": '" + value + "' is not a number");
  return x;
}

Vec parse_vec(const std::string& value, const std::string& where) {
  std::vector<double> xs;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) xs.push_back(parse_number(trim(part), where));
  if (xs.empty() || static_cast<int>(xs.size()) > kMaxDim)
    throw ValidationError("config field " + where + ": expected 1 to 8 comma-separated numbers");
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ValidationError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (cfg.has(section, key)) throw ValidationError(where + ": duplicate key " + label(section, key));
    cfg.entries_[section][key] = value;
  }
  return cfg;
}

Config Config::parse_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  return parse(in, path);
}

std::string Config::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : entries_) {
    if (!section.empty()) {
      if (!first) out << '\n';
      out << '[' << section << "]\n";
    }
    for (const auto& [key, value] : keys) out << key << " = " << value << '\n';
    first = false;
  }
  return out.str();
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = entries_.find(section);
  return s != entries_.end() && s->second.count(key) > 0;
}

std::string Config::text(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ValidationError("config field " + label(section, key) + " is missing");
  return entries_.at(section).at(key);
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? entries_.at(section).at(key) : fallback;
}

double Config::number(const std::string& section, const std::string& key) const {
  return parse_number(text(section, key), label(section, key));
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

int Config::integer(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  const double x = number(section, key);
  if (x != static_cast<double>(static_cast<int>(x)))
    throw ValidationError("config field " + label(section, key) + ": expected an integer");
  return static_cast<int>(x);
}

Vec Config::vector(const std::string& section, const std::string& key) const {
  return parse_vec(text(section, key), label(section, key));
}

std::vector<Vec> Config::points(const std::string& section, const std::string& key) const {
  std::vector<Vec> pts;
  std::stringstream ss(text(section, key));
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (trim(part).empty()) continue;
    pts.push_back(parse_vec(part, label(section, key)));
  }
  if (pts.empty()) throw ValidationError("config field " + label(section, key) + ": no points");
  return pts;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  entries_[section][key] = value;
}

}  // namespace liouville
