#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "lsrlab/error.hpp"
#include "lsrlab/harness.hpp"

#ifndef LSRLAB_VERSION
#define LSRLAB_VERSION "0.0.0"
#endif

namespace lsrlab {

std::string library_version() { return LSRLAB_VERSION; }

std::string_view run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Incomplete: return "incomplete";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

namespace {

constexpr const char* kNa = "NA";

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : kNa; }

std::string quoted(const std::string& s) {
  std::string clean;
  for (char ch : s) clean += (ch == '\n' || ch == '\r') ? ' ' : ch;
  if (clean.find_first_of(",\"") == std::string::npos) return clean;
  std::string out = "\"";
  for (char ch : clean) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_record(const std::string& line, long lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        in_quotes = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      in_quotes = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quote", lineno);
  out.push_back(std::move(cur));
  return out;
}

std::string set_label(const std::vector<AttributeId>& set) {
  if (set.empty()) return "none";
  std::string s;
  for (AttributeId a : set) s += (s.empty() ? "" : "+") + std::string(attribute_name(a));
  return s;
}

}  // namespace

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"label", "status", "config_digest", "model", "dataset", "latent_dim",
                                  "regularised", "seed", "epochs", "steps", "train_loss",
                                  "loss_total", "loss_reconstruction", "loss_kld"};
    for (AttributeId a : kAllAttributes) c.push_back("lsr_" + std::string(attribute_name(a)));
    c.insert(c.end(), {"loss_adversarial_d", "loss_adversarial_enc", "reconstruction_accuracy",
                       "efficiency_mean", "efficiency_sd"});
    for (AttributeId a : kAllAttributes) c.push_back("independence_" + std::string(attribute_name(a)));
    c.push_back("independence_mean");
    for (AttributeId a : kAllAttributes) c.push_back("interpretability_" + std::string(attribute_name(a)));
    c.insert(c.end(), {"failed_step", "wall_seconds", "version", "error"});
    return c;
  }();
  return cols;
}

void write_report_header(std::ostream& out) {
  out << "# lsrlab-report v" << kReportVersion << "\n";
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
}

void write_report_row(std::ostream& out, const RunReport& r) {
  std::vector<std::string> f = {quoted(r.label), std::string(run_status_name(r.status)), r.config_digest,
                                std::string(model_kind_name(r.kind)), quoted(r.dataset),
                                std::to_string(r.latent_dim), set_label(r.regularised),
                                std::to_string(r.seed), std::to_string(r.epochs), std::to_string(r.steps),
                                opt(r.train_loss)};
  const bool adversarial = r.kind == ModelKind::AdversarialVae;
  if (r.metrics) {
    const MetricReport& m = *r.metrics;
    f.insert(f.end(), {num(m.loss.total), num(m.loss.reconstruction), num(m.loss.kld)});
    for (AttributeId a : kAllAttributes) {
      const auto it = m.loss.lsr_per_attribute.find(a);
      f.push_back(it == m.loss.lsr_per_attribute.end() ? kNa : num(it->second));
    }
    f.push_back(adversarial ? num(m.loss.adversarial_d) : kNa);
    f.push_back(adversarial ? num(m.loss.adversarial_enc) : kNa);
    f.insert(f.end(), {num(m.reconstruction_accuracy), num(m.reconstruction_efficiency_mean),
                       num(m.reconstruction_efficiency_sd)});
    for (AttributeId a : kAllAttributes) f.push_back(num(m.independence.at(a)));
    f.push_back(num(m.independence_mean));
    for (AttributeId a : kAllAttributes) f.push_back(opt(m.interpretability.at(a)));
  } else {
    f.resize(f.size() + 21, kNa);
  }
  f.push_back(r.failed_step ? std::to_string(*r.failed_step) : kNa);
  f.push_back(num(r.wall_seconds));
  f.push_back(quoted(r.version));
  f.push_back(quoted(r.error));
  for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
  out << "\n";
}

namespace {

class RowReader {
 public:
  RowReader(std::vector<std::string> fields, long line) : f_(std::move(fields)), line_(line) {}

  const std::string& next() {
    if (i_ >= f_.size()) fail("too few fields");
    return f_[i_++];
  }
  template <class T>
  T integer() {
    const std::string& s = next();
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }
  double real() {
    const std::string& s = next();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }
  std::optional<double> maybe_real() {
    if (f_.at(i_) == kNa) {
      ++i_;
      return std::nullopt;
    }
    return real();
  }
  bool peek_na() const { return i_ < f_.size() && f_[i_] == kNa; }
  void skip(std::size_t n) { i_ += n; }
  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::ParseError, what, line_); }

 private:
  std::vector<std::string> f_;
  std::size_t i_ = 0;
  long line_;
};

}  // namespace

std::vector<RunReport> read_reports(std::istream& in) {
  std::vector<RunReport> out;
  std::string line;
  long lineno = 0;
  bool version_seen = false, header_seen = false;
  const std::string expected = "# lsrlab-report v" + std::to_string(kReportVersion);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!version_seen) {
      if (line != expected) throw Error(ErrorCode::ParseError, "expected '" + expected + "'", lineno);
      version_seen = true;
      continue;
    }
    auto fields = split_record(line, lineno);
    if (!header_seen) {
      if (fields != report_columns()) throw Error(ErrorCode::ParseError, "unexpected header", lineno);
      header_seen = true;
      continue;
    }
    if (fields.size() != report_columns().size()) {
      throw Error(ErrorCode::ParseError,
                  "expected " + std::to_string(report_columns().size()) + " fields, got " +
                      std::to_string(fields.size()),
                  lineno);
    }
    RowReader rr(std::move(fields), lineno);
    RunReport r;
    r.label = rr.next();
    const std::string status = rr.next();
    bool known = false;
    for (RunStatus s : {RunStatus::Ok, RunStatus::Incomplete, RunStatus::Diverged, RunStatus::Failed}) {
      if (run_status_name(s) == status) {
        r.status = s;
        known = true;
      }
    }
    if (!known) rr.fail("unknown status '" + status + "'");
    r.config_digest = rr.next();
    try {
      r.kind = parse_model_kind(rr.next());
    } catch (const Error& e) {
      rr.fail(e.what());
    }
    r.dataset = rr.next();
    r.latent_dim = rr.integer<int>();
    const std::string reg = rr.next();
    if (reg != "none") {
      std::stringstream ss(reg);
      std::string item;
      while (std::getline(ss, item, '+')) {
        const auto a = parse_attribute(item);
        if (!a) rr.fail("unknown attribute '" + item + "'");
        r.regularised.push_back(*a);
      }
    }
    r.seed = rr.integer<std::uint64_t>();
    r.epochs = rr.integer<int>();
    r.steps = rr.integer<std::uint64_t>();
    r.train_loss = rr.maybe_real();
    if (rr.peek_na()) {
      rr.skip(21);
    } else {
      MetricReport m;
      m.loss.total = rr.real();
      m.loss.reconstruction = rr.real();
      m.loss.kld = rr.real();
      for (AttributeId a : kAllAttributes) {
        if (const auto v = rr.maybe_real()) m.loss.lsr_per_attribute[a] = *v;
      }
      m.loss.adversarial_d = rr.maybe_real().value_or(0.0);
      m.loss.adversarial_enc = rr.maybe_real().value_or(0.0);
      m.reconstruction_accuracy = rr.real();
      m.reconstruction_efficiency_mean = rr.real();
      m.reconstruction_efficiency_sd = rr.real();
      for (AttributeId a : kAllAttributes) m.independence[a] = rr.real();
      m.independence_mean = rr.real();
      for (AttributeId a : kAllAttributes) m.interpretability[a] = rr.maybe_real();
      r.metrics = std::move(m);
    }
    if (rr.peek_na()) {
      rr.skip(1);
    } else {
      r.failed_step = rr.integer<long>();
    }
    r.wall_seconds = rr.real();
    r.version = rr.next();
    r.error = rr.next();
    out.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "missing report header", lineno);
  return out;
}

void write_stats_csv(std::ostream& out, const std::vector<Corpus>& corpora) {
  out << "dataset";
  for (AttributeId a : kAllAttributes) out << "," << attribute_name(a) << "_mean," << attribute_name(a) << "_std";
  out << ",notes,measures\n";
  for (const Corpus& c : corpora) {
    const DatasetStats s = dataset_statistics(c);
    out << quoted(c.name);
    for (AttributeId a : kAllAttributes) {
      out << "," << num(s.attributes.at(a).mean) << "," << num(s.attributes.at(a).sd);
    }
    out << "," << s.note_count << "," << s.measure_count << "\n";
  }
}

}  // namespace lsrlab
