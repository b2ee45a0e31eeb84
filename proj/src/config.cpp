#include "actevo/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "actevo/errors.hpp"
#include "actevo/nn.hpp"

namespace actevo::config {

using nlohmann::json;
using nlohmann::ordered_json;
using search::SearchConfig;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct IniData {
  // section -> key -> (value, line number)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
};

IniData parse_ini_text(const std::string& text) {
  IniData ini;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    ini.sections[section][key] = {value, lineno};
  }
  return ini;
}

class Reader {
 public:
  explicit Reader(IniData ini) : ini_(std::move(ini)) {}

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = ini_.sections.find(sec);
    return s != ini_.sections.end() && s->second.count(key) > 0;
  }

  std::string raw(const std::string& sec, const std::string& key) {
    used_[sec].insert(key);
    return ini_.sections.at(sec).at(key).first;
  }

  int line(const std::string& sec, const std::string& key) const {
    return ini_.sections.at(sec).at(key).second;
  }

  template <typename T>
  void read(const std::string& sec, const std::string& key, T& out) {
    if (!has(sec, key)) return;
    parse(sec, key, raw(sec, key), out);
  }

  void check_unknown() const {
    static const std::map<std::string, bool> known_sections = {
        {"search", true}, {"train", true}, {"net", true},
        {"data", true},   {"policy", true}};
    for (const auto& [sec, keys] : ini_.sections) {
      if (!known_sections.count(sec))
        throw ConfigError("unknown config section [" + sec + "]");
      const auto it = used_.find(sec);
      for (const auto& [key, val] : keys) {
        if (it == used_.end() || !it->second.count(key))
          throw ConfigError("line " + std::to_string(val.second) +
                            ": unknown key '" + key + "' in [" + sec + "]");
      }
    }
  }

 private:
  [[noreturn]] void bad(const std::string& sec, const std::string& key,
                        const std::string& want) {
    throw ConfigError("line " + std::to_string(line(sec, key)) + ": [" + sec +
                      "] " + key + " must be " + want);
  }

  void parse(const std::string& sec, const std::string& key,
             const std::string& v, int& out) {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      bad(sec, key, "an integer");
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, std::uint64_t& out) {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      bad(sec, key, "an unsigned integer");
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(v, &used);
      if (used != v.size()) bad(sec, key, "a number");
    } catch (const std::logic_error&) {
      bad(sec, key, "a number");
    }
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, bool& out) {
    if (v == "true" || v == "1")
      out = true;
    else if (v == "false" || v == "0")
      out = false;
    else
      bad(sec, key, "true or false");
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, std::string& out) {
    out = v;
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, std::vector<int>& out) {
    out.clear();
    std::istringstream in(v);
    std::string part;
    while (std::getline(in, part, ',')) {
      int x = 0;
      parse(sec, key, trim(part), x);
      out.push_back(x);
    }
  }
  void parse(const std::string& sec, const std::string& key,
             const std::string& v, std::vector<std::string>& out) {
    out.clear();
    std::istringstream in(v);
    std::string part;
    while (std::getline(in, part, ';')) {
      part = trim(part);
      if (!part.empty()) out.push_back(part);
    }
  }

  IniData ini_;
  std::map<std::string, std::set<std::string>> used_;
};

}  // namespace

search::SearchConfig parse_ini(const std::string& text) {
  Reader r(parse_ini_text(text));
  SearchConfig cfg;

  std::string strategy = "evolution", fitness = "loss", kind = "spirals";
  r.read("search", "strategy", strategy);
  cfg.strategy = search::strategy_from_string(strategy);
  r.read("search", "depth", cfg.space_depth);
  r.read("search", "population", cfg.population);
  r.read("search", "elite", cfg.elite);
  r.read("search", "random_inject", cfg.random_inject);
  const bool offspring_given = r.has("search", "offspring");
  r.read("search", "offspring", cfg.offspring);
  if (!offspring_given)
    cfg.offspring = cfg.population - cfg.elite - cfg.random_inject;
  r.read("search", "generations", cfg.generations);
  r.read("search", "fitness", fitness);
  cfg.fitness = search::fitness_from_string(fitness);
  r.read("search", "master_seed", cfg.master_seed);
  r.read("search", "extended_alphabet", cfg.extended_alphabet);
  r.read("search", "seed_exprs", cfg.seed_exprs);

  r.read("train", "epochs", cfg.train.epochs);
  r.read("train", "batch_size", cfg.train.batch_size);
  r.read("train", "base_lr", cfg.train.base_lr);
  r.read("train", "lr_decay_factor", cfg.train.lr_decay_factor);
  r.read("train", "lr_decay_epochs", cfg.train.lr_decay_epochs);
  r.read("train", "momentum", cfg.train.momentum);
  r.read("train", "divergence_loss_cap", cfg.train.divergence_loss_cap);
  if (cfg.train.lr_decay_epochs.empty())
    cfg.train.lr_decay_epochs = nn::default_decay_epochs(cfg.train.epochs);

  r.read("net", "hidden", cfg.net.hidden_layers);
  r.read("net", "batch_norm", cfg.net.batch_norm);

  r.read("data", "kind", kind);
  cfg.data.kind = data::synthetic_kind_from_string(kind);
  r.read("data", "classes", cfg.data.classes);
  r.read("data", "n_per_class", cfg.data.n_per_class);
  r.read("data", "val_per_class", cfg.data.val_per_class);
  r.read("data", "test_per_class", cfg.data.test_per_class);
  r.read("data", "noise", cfg.data.noise);

  r.read("policy", "epsilon", cfg.policy.epsilon);
  r.read("policy", "exp_clamp", cfg.policy.exp_clamp);
  r.read("policy", "deriv_cap", cfg.policy.deriv_cap);
  r.read("policy", "atanh_margin", cfg.policy.atanh_margin);

  r.check_unknown();
  cfg.validate();
  return cfg;
}

search::SearchConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ini(buf.str());
}

ordered_json to_json(const SearchConfig& cfg) {
  ordered_json j;
  j["search"] = {{"strategy", search::to_string(cfg.strategy)},
                 {"depth", cfg.space_depth},
                 {"population", cfg.population},
                 {"elite", cfg.elite},
                 {"random_inject", cfg.random_inject},
                 {"offspring", cfg.offspring},
                 {"generations", cfg.generations},
                 {"fitness", search::to_string(cfg.fitness)},
                 {"master_seed", cfg.master_seed},
                 {"extended_alphabet", cfg.extended_alphabet},
                 {"seed_exprs", cfg.seed_exprs}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"base_lr", cfg.train.base_lr},
                {"lr_decay_factor", cfg.train.lr_decay_factor},
                {"lr_decay_epochs", cfg.train.lr_decay_epochs.empty()
                                        ? nn::default_decay_epochs(cfg.train.epochs)
                                        : cfg.train.lr_decay_epochs},
                {"momentum", cfg.train.momentum},
                {"divergence_loss_cap", cfg.train.divergence_loss_cap}};
  j["net"] = {{"hidden", cfg.net.hidden_layers},
              {"batch_norm", cfg.net.batch_norm}};
  j["data"] = {{"kind", data::to_string(cfg.data.kind)},
               {"classes", cfg.data.classes},
               {"n_per_class", cfg.data.n_per_class},
               {"val_per_class", cfg.data.val_per_class},
               {"test_per_class", cfg.data.test_per_class},
               {"noise", cfg.data.noise}};
  j["policy"] = {{"epsilon", cfg.policy.epsilon},
                 {"exp_clamp", cfg.policy.exp_clamp},
                 {"deriv_cap", cfg.policy.deriv_cap},
                 {"atanh_margin", cfg.policy.atanh_margin}};
  return j;
}

search::SearchConfig from_json(const json& j) {
  SearchConfig cfg;
  const json& s = j.at("search");
  cfg.strategy = search::strategy_from_string(s.at("strategy"));
  cfg.space_depth = s.at("depth");
  cfg.population = s.at("population");
  cfg.elite = s.at("elite");
  cfg.random_inject = s.at("random_inject");
  cfg.offspring = s.at("offspring");
  cfg.generations = s.at("generations");
  cfg.fitness = search::fitness_from_string(s.at("fitness"));
  cfg.master_seed = s.at("master_seed");
  cfg.extended_alphabet = s.at("extended_alphabet");
  cfg.seed_exprs = s.at("seed_exprs").get<std::vector<std::string>>();

  const json& t = j.at("train");
  cfg.train.epochs = t.at("epochs");
  cfg.train.batch_size = t.at("batch_size");
  cfg.train.base_lr = t.at("base_lr");
  cfg.train.lr_decay_factor = t.at("lr_decay_factor");
  cfg.train.lr_decay_epochs = t.at("lr_decay_epochs").get<std::vector<int>>();
  cfg.train.momentum = t.at("momentum");
  cfg.train.divergence_loss_cap = t.at("divergence_loss_cap");

  const json& n = j.at("net");
  cfg.net.hidden_layers = n.at("hidden").get<std::vector<int>>();
  cfg.net.batch_norm = n.at("batch_norm");

  const json& d = j.at("data");
  cfg.data.kind = data::synthetic_kind_from_string(d.at("kind"));
  cfg.data.classes = d.at("classes");
  cfg.data.n_per_class = d.at("n_per_class");
  cfg.data.val_per_class = d.at("val_per_class");
  cfg.data.test_per_class = d.at("test_per_class");
  cfg.data.noise = d.at("noise");

  const json& p = j.at("policy");
  cfg.policy.epsilon = p.at("epsilon");
  cfg.policy.exp_clamp = p.at("exp_clamp");
  cfg.policy.deriv_cap = p.at("deriv_cap");
  cfg.policy.atanh_margin = p.at("atanh_margin");

  cfg.validate();
  return cfg;
}

std::string digest(const SearchConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* hexd = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hexd[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace actevo::config
