#include "fairpls/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fairpls/error.hpp"

namespace fairpls {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void scalar(const std::string& name, double v) { os_ << "scalar " << name << ' ' << format_double(v) << '\n'; }
  void string(const std::string& name, const std::string& v) { os_ << "string " << name << ' ' << v << '\n'; }
  void strings(const std::string& name, const std::vector<std::string>& v) {
    os_ << "strings " << name << ' ' << v.size() << '\n';
    for (const auto& s : v) os_ << s << '\n';
  }
  void matrix(const std::string& name, const Matrix& m) {
    os_ << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) os_ << (j ? " " : "") << format_double(m(i, j));
      os_ << '\n';
    }
  }
  void vector(const std::string& name, const Vector& v) {
    os_ << "vector " << name << ' ' << v.size() << '\n';
    for (Index i = 0; i < v.size(); ++i) os_ << (i ? " " : "") << format_double(v(i));
    os_ << '\n';
  }
  void stats(const CenteringStats& st) {
    scalar("stats_input_cols", static_cast<double>(st.input_cols));
    string("stats_normalization", st.normalization == Normalization::standardize ? "standardize" : "none");
    Vector kept(st.output_cols());
    for (Index i = 0; i < kept.size(); ++i) kept(i) = static_cast<double>(st.kept[static_cast<std::size_t>(i)]);
    vector("stats_kept", kept);
    vector("stats_means", st.means);
    vector("stats_scales", st.scales);
    strings("stats_names", st.names);
  }
  void traces(const std::vector<ComponentTrace>& ts) {
    for (std::size_t h = 0; h < ts.size(); ++h) {
      const auto& t = ts[h];
      os_ << "trace " << h << ' ' << t.restart << ' ' << t.iterations << ' ' << t.halvings << ' ' << (t.converged ? 1 : 0)
          << ' ' << format_double(t.residual) << ' ' << t.objective.size() << '\n';
      for (std::size_t i = 0; i < t.objective.size(); ++i) os_ << (i ? " " : "") << format_double(t.objective[i]);
      os_ << '\n';
    }
  }

 private:
  std::ostream& os_;
};

struct Record {
  std::string kind;
  std::map<std::string, Matrix> matrices;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> strings;
  std::map<std::string, std::vector<std::string>> lists;
  std::vector<ComponentTrace> traces;

  const Matrix& mat(const std::string& n) const {
    auto it = matrices.find(n);
    if (it == matrices.end()) throw Error(ErrorKind::parse, "model file lacks matrix '" + n + "'");
    return it->second;
  }
  Vector vec(const std::string& n) const {
    const Matrix& m = mat(n);
    return Eigen::Map<const Vector>(m.data(), m.size());
  }
  double num(const std::string& n) const {
    auto it = scalars.find(n);
    if (it == scalars.end()) throw Error(ErrorKind::parse, "model file lacks scalar '" + n + "'");
    return it->second;
  }
  const std::string& str(const std::string& n) const {
    auto it = strings.find(n);
    if (it == strings.end()) throw Error(ErrorKind::parse, "model file lacks string '" + n + "'");
    return it->second;
  }
  std::vector<std::string> list(const std::string& n) const {
    auto it = lists.find(n);
    return it == lists.end() ? std::vector<std::string>{} : it->second;
  }
  CenteringStats stats() const {
    CenteringStats st;
    st.input_cols = static_cast<Index>(num("stats_input_cols"));
    st.normalization = str("stats_normalization") == "standardize" ? Normalization::standardize : Normalization::none;
    Vector kept = vec("stats_kept");
    for (Index i = 0; i < kept.size(); ++i) st.kept.push_back(static_cast<Index>(kept(i)));
    st.means = vec("stats_means");
    st.scales = vec("stats_scales");
    st.names = list("stats_names");
    return st;
  }
};

double parse_number(const std::string& tok, std::size_t line) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) throw ParseError("bad number '" + tok + "' in model file", line, 1);
  return v;
}

std::vector<double> read_numbers(std::istream& is, std::size_t count, std::size_t& line) {
  std::vector<double> out;
  out.reserve(count);
  std::string l;
  while (out.size() < count) {
    if (!std::getline(is, l)) throw ParseError("unexpected end of model file", line, 1);
    ++line;
    std::istringstream ls(l);
    std::string tok;
    while (ls >> tok) out.push_back(parse_number(tok, line));
  }
  if (out.size() != count) throw ParseError("value count mismatch in model file", line, 1);
  return out;
}

Record read_record(std::istream& is) {
  Record rec;
  std::string l;
  std::size_t line = 0;
  if (!std::getline(is, l) || l.rfind("fairpls-model 1", 0) != 0) throw ParseError("not a fairpls model file", 1, 1);
  ++line;
  bool ended = false;
  while (std::getline(is, l)) {
    ++line;
    if (l.empty()) continue;
    std::istringstream ls(l);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      ended = true;
      break;
    }
    if (tag == "kind") {
      ls >> rec.kind;
    } else if (tag == "scalar") {
      std::string name, v;
      ls >> name >> v;
      rec.scalars[name] = parse_number(v, line);
    } else if (tag == "string") {
      std::string name;
      ls >> name;
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      rec.strings[name] = rest;
    } else if (tag == "strings") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      std::vector<std::string> items;
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(is, l)) throw ParseError("unexpected end of model file", line, 1);
        ++line;
        items.push_back(l);
      }
      rec.lists[name] = items;
    } else if (tag == "matrix" || tag == "vector") {
      std::string name;
      long long rows = 0, cols = 1;
      ls >> name >> rows;
      if (tag == "matrix") ls >> cols;
      if (rows < 0 || cols < 0) throw ParseError("negative dimension in model file", line, 1);
      auto values = read_numbers(is, static_cast<std::size_t>(rows * cols), line);
      Matrix m(rows, cols);
      for (long long i = 0; i < rows; ++i)
        for (long long j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
      rec.matrices[name] = m;
    } else if (tag == "trace") {
      ComponentTrace t;
      std::size_t h = 0, len = 0;
      int conv = 0;
      std::string resid;
      ls >> h >> t.restart >> t.iterations >> t.halvings >> conv >> resid >> len;
      t.converged = conv != 0;
      t.residual = parse_number(resid, line);
      t.objective = read_numbers(is, len, line);
      rec.traces.push_back(std::move(t));
    } else {
      throw ParseError("unknown tag '" + tag + "' in model file", line, 1);
    }
  }
  if (!ended) throw ParseError("model file is truncated (no 'end')", line, 1);
  return rec;
}

KernelSpec parse_kernel(const std::string& s) {
  std::istringstream is(s);
  std::string kind;
  is >> kind;
  if (kind == "linear") return KernelSpec::linear();
  double sigma = 0;
  std::string tok;
  is >> tok;
  sigma = parse_number(tok, 0);
  return KernelSpec::rbf(sigma);
}

std::string kernel_line(const KernelSpec& k) {
  return k.kind == KernelKind::linear ? "linear" : "rbf " + format_double(*k.bandwidth);
}

}  // namespace

const char* model_kind(const AnyModel& model) {
  switch (model.index()) {
    case 0: return "pls";
    case 1: return "fair-pls";
    default: return "kernel-fair-pls";
  }
}

const CenteringStats& model_stats(const AnyModel& model) {
  return std::visit([](const auto& m) -> const CenteringStats& { return m.x_stats; }, model);
}

Matrix transform_any(const AnyModel& model, const Matrix& X_centered) {
  if (const auto* p = std::get_if<PlsModel>(&model)) return transform(*p, X_centered);
  if (const auto* f = std::get_if<FairPlsModel>(&model)) return transform(*f, X_centered);
  return kfpls_transform(std::get<KernelFairPlsModel>(model), X_centered);
}

void write_model(std::ostream& os, const AnyModel& model) {
  Writer w(os);
  os << "fairpls-model 1\n";
  os << "kind " << model_kind(model) << '\n';
  if (const auto* p = std::get_if<PlsModel>(&model)) {
    w.matrix("W", p->W);
    w.matrix("P", p->P);
    w.matrix("C", p->C);
    w.vector("b", p->b);
    w.matrix("T", p->T);
    w.matrix("U", p->U);
    Vector its(static_cast<Index>(p->iterations.size()));
    for (Index i = 0; i < its.size(); ++i) its(i) = p->iterations[static_cast<std::size_t>(i)];
    w.vector("iterations", its);
    w.stats(p->x_stats);
    w.strings("warnings", p->warnings);
  } else if (const auto* f = std::get_if<FairPlsModel>(&model)) {
    w.scalar("eta", f->eta);
    w.scalar("ridge", f->ridge);
    w.string("mode", fairness_mode_name(f->mode));
    w.matrix("W", f->W);
    w.matrix("Gamma", f->Gamma);
    w.matrix("T", f->T);
    w.stats(f->x_stats);
    w.strings("warnings", f->warnings);
    w.traces(f->traces);
  } else {
    const auto& k = std::get<KernelFairPlsModel>(model);
    w.scalar("eta", k.eta);
    w.string("kernel_x", kernel_line(k.kernel_x));
    w.string("kernel_s", kernel_line(k.kernel_s));
    w.string("fingerprint", std::to_string(k.fingerprint.rows) + " " + std::to_string(k.fingerprint.cols) + " " +
                                std::to_string(k.fingerprint.checksum));
    w.matrix("A", k.A);
    w.matrix("T", k.T);
    w.matrix("Tau", k.Tau);
    w.matrix("KTau", k.KTau);
    w.vector("score_norms", k.score_norms);
    w.vector("tau_k_tau", k.tau_k_tau);
    w.vector("gram_col_means", k.centering.col_means);
    w.scalar("gram_grand_mean", k.centering.grand_mean);
    w.matrix("train_x", k.train_x);
    w.stats(k.x_stats);
    w.strings("warnings", k.warnings);
    w.traces(k.traces);
  }
  os << "end\n";
}

AnyModel read_model(std::istream& is) {
  Record r = read_record(is);
  if (r.kind == "pls") {
    PlsModel m;
    m.W = r.mat("W");
    m.P = r.mat("P");
    m.C = r.mat("C");
    m.b = r.vec("b");
    m.T = r.mat("T");
    m.U = r.mat("U");
    Vector its = r.vec("iterations");
    for (Index i = 0; i < its.size(); ++i) m.iterations.push_back(static_cast<int>(its(i)));
    m.x_stats = r.stats();
    m.warnings = r.list("warnings");
    return m;
  }
  if (r.kind == "fair-pls") {
    FairPlsModel m;
    m.eta = r.num("eta");
    m.ridge = r.num("ridge");
    m.mode = parse_fairness_mode(r.str("mode"));
    m.W = r.mat("W");
    m.Gamma = r.mat("Gamma");
    m.T = r.mat("T");
    m.x_stats = r.stats();
    m.warnings = r.list("warnings");
    m.traces = r.traces;
    return m;
  }
  if (r.kind == "kernel-fair-pls") {
    KernelFairPlsModel m;
    m.eta = r.num("eta");
    m.kernel_x = parse_kernel(r.str("kernel_x"));
    m.kernel_s = parse_kernel(r.str("kernel_s"));
    m.A = r.mat("A");
    m.T = r.mat("T");
    m.Tau = r.mat("Tau");
    m.KTau = r.mat("KTau");
    m.score_norms = r.vec("score_norms");
    m.tau_k_tau = r.vec("tau_k_tau");
    m.centering.col_means = r.vec("gram_col_means");
    m.centering.grand_mean = r.num("gram_grand_mean");
    m.train_x = r.mat("train_x");
    m.x_stats = r.stats();
    m.warnings = r.list("warnings");
    m.traces = r.traces;
    std::istringstream fp(r.str("fingerprint"));
    fp >> m.fingerprint.rows >> m.fingerprint.cols >> m.fingerprint.checksum;
    if (!(DataFingerprint::of(m.train_x) == m.fingerprint))
      throw Error(ErrorKind::parse, "kernel model training-data fingerprint does not match the stored rows");
    return m;
  }
  throw Error(ErrorKind::parse, "unknown model kind '" + r.kind + "'");
}

void save_model(const std::string& path, const AnyModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write model file '" + path + "'");
  write_model(os, model);
  if (!os) throw Error(ErrorKind::io, "failed writing model file '" + path + "'");
}

AnyModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "file not found: " + path);
  return read_model(is);
}

NamedMatrix read_numeric_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "file not found: " + path);
  NamedMatrix out;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw ParseError("missing header row", 1, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.names.push_back(tok);
  }
  std::vector<double> vals;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::size_t col = 0;
    while (std::getline(ss, tok, ',')) {
      ++col;
      double v = 0;
      const char* b = tok.data();
      const char* e = b + tok.size();
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) throw ParseError("non-numeric token '" + tok + "'", line_no, col);
      vals.push_back(v);
    }
    if (col != out.names.size())
      throw ParseError("expected " + std::to_string(out.names.size()) + " fields, found " + std::to_string(col), line_no,
                       col);
    ++rows;
  }
  out.values.resize(static_cast<Index>(rows), static_cast<Index>(out.names.size()));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < out.names.size(); ++j)
      out.values(static_cast<Index>(i), static_cast<Index>(j)) = vals[i * out.names.size() + j];
  return out;
}

void write_numeric_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& names) {
  if (static_cast<Index>(names.size()) != m.cols()) throw Error(ErrorKind::dimension_mismatch, "column names do not match matrix");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << names[j];
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

}  // namespace fairpls
