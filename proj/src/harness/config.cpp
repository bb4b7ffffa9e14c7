#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lsrlab/error.hpp"
#include "lsrlab/harness.hpp"

namespace lsrlab {

namespace pt = boost::property_tree;

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::PaperSec5: return "paper-sec5";
    case Preset::PaperSec6: return "paper-sec6";
    case Preset::Desk: return "desk";
  }
  return "?";
}

Preset parse_preset(std::string_view s) {
  for (Preset p : {Preset::PaperSec5, Preset::PaperSec6, Preset::Desk}) {
    if (preset_name(p) == s) return p;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown preset '" + std::string(s) + "'");
}

Corpus load_source(const DataSource& source) {
  if (!source.synthetic()) {
    Corpus c = load_corpus(source.path);
    c.name = source.name;
    return c;
  }
  Corpus c = synthetic_corpus(source.synthetic_seed, source.synthetic_n, source.profile);
  c.name = source.name;
  return c;
}

void ExperimentConfig::validate() const {
  latent.validate();
  arch.validate();
  train.validate();
  split.validate();
  if (std::find(kLatentDims.begin(), kLatentDims.end(), latent.d) == kLatentDims.end()) {
    throw Error(ErrorCode::ConfigInvalid, "latent dims must be one of 4, 8, 16, 32, 64, 128, 256");
  }
  if (kind == ModelKind::AdversarialVae && !latent.regularised.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "adversarial_vae takes no regularised dimensions");
  }
  if (bins < 2) throw Error(ErrorCode::ConfigInvalid, "bins must be >= 2");
  if (!(bins_mu > 0.0)) throw Error(ErrorCode::ConfigInvalid, "bins_mu must be positive");
  if (data.synthetic()) {
    if (data.synthetic_n < 3) throw Error(ErrorCode::ConfigInvalid, "synthetic_n must be >= 3");
    data.profile.validate();
  }
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  split.seed = seed;
  train.seed = seed;
}

std::size_t GridConfig::cell_count() const {
  return datasets.size() * latent_dims.size() * regularised_sets.size();
}

namespace {

std::string regularised_label(const std::vector<AttributeId>& set) {
  if (set.empty()) return "none";
  std::string s;
  for (AttributeId a : set) {
    if (!s.empty()) s += '+';
    s += attribute_name(a);
  }
  return s;
}

std::vector<LatentBinding> bind_in_order(const std::vector<AttributeId>& set) {
  std::vector<LatentBinding> out;
  for (std::size_t i = 0; i < set.size(); ++i) out.push_back({set[i], static_cast<int>(i)});
  return out;
}

}  // namespace

std::vector<ExperimentConfig> GridConfig::cells() const {
  if (cell_count() == 0) throw Error(ErrorCode::ConfigInvalid, "grid has an empty axis");
  std::vector<ExperimentConfig> out;
  for (const DataSource& ds : datasets) {
    for (int d : latent_dims) {
      for (const auto& set : regularised_sets) {
        ExperimentConfig c = base;
        c.data = ds;
        c.latent.d = d;
        c.latent.regularised = bind_in_order(set);
        c.label = ds.name + "-d" + std::to_string(d) + "-" + regularised_label(set);
        c.out = base.out / "cells" / c.label;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  switch (p) {
    case Preset::PaperSec5:
      c.label = "paper-sec5";
      c.data.synthetic_n = 20000;
      c.latent.d = 256;
      c.latent.regularised = bind_in_order({AttributeId::ND, AttributeId::NR, AttributeId::RC, AttributeId::AIJ});
      c.train.epochs = 50;  // "50 iterations" taken as epochs
      c.train.batch_size = 64;
      c.train.settings.adam.lr = 1e-4;
      c.train.settings.disc_adam.lr = 1e-4;
      c.train.settings.weights = {0.1, 0.1, 0.2};
      c.out = "runs/paper-sec5";
      break;
    case Preset::PaperSec6:
      c.label = "paper-sec6";
      c.data.synthetic_n = 20000;
      c.latent.d = 32;
      c.latent.regularised = bind_in_order({AttributeId::ND, AttributeId::RC});
      c.train.epochs = 25;
      c.train.batch_size = 64;
      c.train.settings.adam = {1e-5, 0.9999, 0.999, 1e-8};
      c.train.settings.disc_adam = c.train.settings.adam;
      c.train.settings.weights = {0.1, 0.1, 0.2};
      c.out = "runs/paper-sec6";
      break;
    case Preset::Desk:
      c.label = "desk";
      c.data.synthetic_n = 2000;
      c.data.profile.nd_mean = 2.5;
      c.data.profile.nd_sd = 1.0;
      c.data.profile.max_step = 1;
      c.data.profile.syncopation = 0.0;
      c.data.profile.rest_probability = 0.0;
      c.latent.d = 8;
      c.latent.regularised = bind_in_order({AttributeId::ND, AttributeId::RC});
      c.bins = 4;
      c.train.epochs = 30;
      c.train.batch_size = 16;
      c.train.settings.adam.lr = 3e-3;
      c.train.settings.disc_adam.lr = 3e-3;
      c.train.settings.weights = {0.1, 1e-4, 0.2};
      c.out = "runs/desk";
      break;
  }
  return c;
}

GridConfig paper_grid() {
  GridConfig g;
  g.base = preset_config(Preset::PaperSec6);
  for (const char* name : {"muse_bach", "lakh_clean", "turkish_makam", "irish_folk"}) {
    DataSource ds;
    ds.name = name;
    ds.path = std::filesystem::path("data") / (std::string(name) + ".txt");
    g.datasets.push_back(ds);
  }
  g.latent_dims.assign(kLatentDims.begin(), kLatentDims.end());
  g.regularised_sets = {{AttributeId::ND, AttributeId::RC},
                        {AttributeId::NR, AttributeId::AIJ},
                        {AttributeId::ND, AttributeId::NR, AttributeId::RC, AttributeId::AIJ}};
  return g;
}

// ---------------------------------------------------------------------------
// INI reading and writing

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::ConfigInvalid, key + " = '" + value + "': expected " + want);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    bad(key, v, std::is_floating_point_v<T> ? "a number" : "an integer");
  }
  return out;
}

AttributeId parse_attr(const std::string& key, const std::string& v) {
  const auto a = parse_attribute(trim(v));
  if (!a) bad(key, v, "one of nd, nr, rc, aij");
  return *a;
}

// "nd, rc" binds to dims 0, 1; "nd:3, rc:5" binds explicitly.
std::vector<LatentBinding> parse_bindings(const std::string& key, const std::string& v) {
  std::vector<LatentBinding> out;
  const auto items = split_list(v);
  if (items.size() == 1 && items[0] == "none") return out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto colon = items[i].find(':');
    if (colon == std::string::npos) {
      out.push_back({parse_attr(key, items[i]), static_cast<int>(i)});
    } else {
      out.push_back({parse_attr(key, items[i].substr(0, colon)),
                     parse_number<int>(key, items[i].substr(colon + 1))});
    }
  }
  return out;
}

std::string bindings_text(const std::vector<LatentBinding>& bs) {
  if (bs.empty()) return "none";
  std::string s;
  for (const auto& b : bs) {
    if (!s.empty()) s += ", ";
    s += std::string(attribute_name(b.attribute)) + ":" + std::to_string(b.dimension);
  }
  return s;
}

std::vector<AttributeId> parse_set(const std::string& key, const std::string& v) {
  std::vector<AttributeId> out;
  if (trim(v) == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, '+')) out.push_back(parse_attr(key, item));
  return out;
}

DataSource parse_source(const std::string& key, const std::string& v, const DataSource& base) {
  DataSource ds = base;
  if (v == "synthetic" || v.rfind("synthetic:", 0) == 0) {
    ds.path.clear();
    ds.name = "synthetic";
    if (v.size() > 10) {
      ds.synthetic_seed = parse_number<std::uint64_t>(key, v.substr(10));
      ds.name = "synthetic" + std::to_string(ds.synthetic_seed);
    }
    return ds;
  }
  ds.path = v;
  ds.name = ds.path.stem().string();
  return ds;
}

struct Reader {
  const pt::ptree& tree;
  std::set<std::string> seen;

  const pt::ptree* section(const std::string& name) {
    seen.insert(name);
    return tree.get_child_optional(name).get_ptr();
  }
};

class Section {
 public:
  Section(const pt::ptree* node, std::string name) : node_(node), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!node_) return std::nullopt;
    const auto v = node_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }
  template <class T>
  void number(const std::string& key, T& out) {
    if (const auto v = raw(key)) out = parse_number<T>(name_ + "." + key, *v);
  }
  void text(const std::string& key, std::string& out) {
    if (const auto v = raw(key)) out = *v;
  }
  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, child] : *node_) {
      if (!child.empty()) throw Error(ErrorCode::ConfigInvalid, "nested key " + name_ + "." + k);
      if (!used_.count(k)) throw Error(ErrorCode::ConfigInvalid, "unknown key " + name_ + "." + k);
    }
  }

 private:
  const pt::ptree* node_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace

GridConfig parse_config(std::istream& in, const GridConfig& base) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.message(), static_cast<long>(e.line()));
  }
  GridConfig g = base;
  ExperimentConfig& c = g.base;
  Reader r{tree, {}};

  {
    Section s(r.section("experiment"), "experiment");
    s.text("label", c.label);
    if (const auto v = s.raw("model")) c.kind = parse_model_kind(*v);
    if (const auto v = s.raw("seed")) c.set_seed(parse_number<std::uint64_t>(s.qualified("seed"), *v));
    if (const auto v = s.raw("out")) c.out = *v;
    s.number("checkpoint_steps", c.checkpoint_steps);
    s.finish();
  }
  {
    Section s(r.section("data"), "data");
    if (const auto v = s.raw("path")) c.data.path = *v;
    if (const auto v = s.raw("name")) {
      c.data.name = *v;
    } else if (!c.data.path.empty()) {
      c.data.name = c.data.path.stem().string();
    }
    s.number("synthetic_n", c.data.synthetic_n);
    s.number("synthetic_seed", c.data.synthetic_seed);
    SyntheticProfile& p = c.data.profile;
    s.number("nd_mean", p.nd_mean);
    s.number("nd_sd", p.nd_sd);
    s.number("pitch_center", p.pitch_center);
    s.number("pitch_spread", p.pitch_spread);
    s.number("max_step", p.max_step);
    s.number("syncopation", p.syncopation);
    s.number("rest_probability", p.rest_probability);
    s.number("train_fraction", c.split.train_fraction);
    s.number("test_fraction", c.split.test_fraction);
    s.number("validation_fraction", c.split.validation_fraction);
    s.finish();
  }
  {
    Section s(r.section("latent"), "latent");
    s.number("dims", c.latent.d);
    if (const auto v = s.raw("regularised")) c.latent.regularised = parse_bindings(s.qualified("regularised"), *v);
    s.finish();
  }
  {
    Section s(r.section("model"), "model");
    s.number("embedding", c.arch.embedding);
    s.number("hidden", c.arch.hidden);
    s.number("disc_hidden", c.arch.disc_hidden);
    s.number("disc_layers", c.arch.disc_layers);
    s.number("bins", c.bins);
    s.number("bins_mu", c.bins_mu);
    s.finish();
  }
  {
    Section s(r.section("train"), "train");
    s.number("epochs", c.train.epochs);
    s.number("batch_size", c.train.batch_size);
    AdamConfig& a = c.train.settings.adam;
    s.number("lr", a.lr);
    s.number("beta1", a.beta1);
    s.number("beta2", a.beta2);
    s.number("eps", a.eps);
    AdamConfig& d = c.train.settings.disc_adam;
    s.number("disc_lr", d.lr);
    s.number("disc_beta1", d.beta1);
    s.number("disc_beta2", d.beta2);
    s.number("disc_eps", d.eps);
    s.finish();
  }
  {
    Section s(r.section("loss"), "loss");
    s.number("alpha", c.train.settings.weights.alpha);
    s.number("beta", c.train.settings.weights.beta);
    s.number("gamma", c.train.settings.weights.gamma);
    s.number("delta", c.latent.delta);
    s.finish();
  }
  {
    Section s(r.section("grid"), "grid");
    if (const auto v = s.raw("datasets")) {
      g.datasets.clear();
      for (const auto& item : split_list(*v)) g.datasets.push_back(parse_source(s.qualified("datasets"), item, c.data));
    }
    if (const auto v = s.raw("latent_dims")) {
      g.latent_dims.clear();
      for (const auto& item : split_list(*v)) g.latent_dims.push_back(parse_number<int>(s.qualified("latent_dims"), item));
    }
    if (const auto v = s.raw("regularised_sets")) {
      g.regularised_sets.clear();
      for (const auto& item : split_list(*v)) g.regularised_sets.push_back(parse_set(s.qualified("regularised_sets"), item));
    }
    s.number("threads", g.threads);
    s.finish();
  }
  for (const auto& [name, child] : tree) {
    if (!r.seen.count(name)) {
      throw Error(ErrorCode::ConfigInvalid, child.empty() ? "key outside a section: " + name : "unknown section [" + name + "]");
    }
  }
  if (g.datasets.empty()) g.datasets = {c.data};
  if (g.latent_dims.empty()) g.latent_dims = {c.latent.d};
  if (g.regularised_sets.empty()) {
    std::vector<AttributeId> set;
    for (const auto& b : c.latent.regularised) set.push_back(b.attribute);
    g.regularised_sets = {set};
  }
  if (g.threads < 1) throw Error(ErrorCode::ConfigInvalid, "grid.threads must be >= 1");
  return g;
}

GridConfig load_config(const std::filesystem::path& path, const GridConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  return parse_config(in, base);
}

namespace {

void write_experiment(std::ostream& os, const ExperimentConfig& c, bool runtime) {
  os << "[experiment]\n";
  if (runtime) os << "label = " << c.label << "\n";
  os << "model = " << model_kind_name(c.kind) << "\n";
  os << "seed = " << c.train.seed << "\n";
  if (runtime) {
    os << "out = " << c.out.string() << "\n";
    os << "checkpoint_steps = " << c.checkpoint_steps << "\n";
  }
  os << "\n[data]\n";
  if (c.data.synthetic()) {
    if (runtime) os << "name = " << c.data.name << "\n";
    const SyntheticProfile& p = c.data.profile;
    os << "synthetic_n = " << c.data.synthetic_n << "\n"
       << "synthetic_seed = " << c.data.synthetic_seed << "\n"
       << "nd_mean = " << fmt(p.nd_mean) << "\n"
       << "nd_sd = " << fmt(p.nd_sd) << "\n"
       << "pitch_center = " << p.pitch_center << "\n"
       << "pitch_spread = " << p.pitch_spread << "\n"
       << "max_step = " << p.max_step << "\n"
       << "syncopation = " << fmt(p.syncopation) << "\n"
       << "rest_probability = " << fmt(p.rest_probability) << "\n";
  } else {
    os << "path = " << c.data.path.string() << "\n";
    if (runtime) os << "name = " << c.data.name << "\n";
  }
  os << "train_fraction = " << fmt(c.split.train_fraction) << "\n"
     << "test_fraction = " << fmt(c.split.test_fraction) << "\n"
     << "validation_fraction = " << fmt(c.split.validation_fraction) << "\n";
  os << "\n[latent]\n"
     << "dims = " << c.latent.d << "\n"
     << "regularised = " << bindings_text(c.latent.regularised) << "\n";
  os << "\n[model]\n"
     << "embedding = " << c.arch.embedding << "\n"
     << "hidden = " << c.arch.hidden << "\n"
     << "disc_hidden = " << c.arch.disc_hidden << "\n"
     << "disc_layers = " << c.arch.disc_layers << "\n"
     << "bins = " << c.bins << "\n"
     << "bins_mu = " << fmt(c.bins_mu) << "\n";
  const AdamConfig& a = c.train.settings.adam;
  const AdamConfig& d = c.train.settings.disc_adam;
  os << "\n[train]\n"
     << "epochs = " << c.train.epochs << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "lr = " << fmt(a.lr) << "\n"
     << "beta1 = " << fmt(a.beta1) << "\n"
     << "beta2 = " << fmt(a.beta2) << "\n"
     << "eps = " << fmt(a.eps) << "\n"
     << "disc_lr = " << fmt(d.lr) << "\n"
     << "disc_beta1 = " << fmt(d.beta1) << "\n"
     << "disc_beta2 = " << fmt(d.beta2) << "\n"
     << "disc_eps = " << fmt(d.eps) << "\n";
  const LossWeights& w = c.train.settings.weights;
  os << "\n[loss]\n"
     << "alpha = " << fmt(w.alpha) << "\n"
     << "beta = " << fmt(w.beta) << "\n"
     << "gamma = " << fmt(w.gamma) << "\n"
     << "delta = " << fmt(c.latent.delta) << "\n";
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::string config_to_ini(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_experiment(os, cfg, true);
  return os.str();
}

std::string grid_to_ini(const GridConfig& g) {
  std::ostringstream os;
  write_experiment(os, g.base, true);
  os << "\n[grid]\ndatasets = ";
  for (std::size_t i = 0; i < g.datasets.size(); ++i) {
    const DataSource& ds = g.datasets[i];
    os << (i ? ", " : "")
       << (ds.synthetic() ? "synthetic:" + std::to_string(ds.synthetic_seed) : ds.path.string());
  }
  os << "\nlatent_dims = ";
  for (std::size_t i = 0; i < g.latent_dims.size(); ++i) os << (i ? ", " : "") << g.latent_dims[i];
  os << "\nregularised_sets = ";
  for (std::size_t i = 0; i < g.regularised_sets.size(); ++i) {
    os << (i ? ", " : "") << regularised_label(g.regularised_sets[i]);
  }
  os << "\nthreads = " << g.threads << "\n";
  return os.str();
}

std::string config_digest(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_experiment(os, cfg, false);
  if (!cfg.data.synthetic()) {
    std::ifstream in(cfg.data.path, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    os << "content = " << fnv1a(body.str()) << "\n";
  }
  char buf[17];
  const auto r = std::to_chars(buf, buf + 16, fnv1a(os.str()), 16);
  return std::string(16 - static_cast<std::size_t>(r.ptr - buf), '0') + std::string(buf, r.ptr);
}

}  // namespace lsrlab
