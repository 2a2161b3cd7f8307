#include "dbm/cli.hpp"

#include "dbm/simulator.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dbm::cli {

using json = nlohmann::ordered_json;

namespace {

// Reads keys from one JSON object, remembering which were consumed so that
// leftovers can be reported as unknown.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  double real(const char* key, double def) {
    if (!take(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int def) {
    if (!take(key)) return def;
    return as_int(j_.at(key), where(key));
  }

  std::uint64_t unsigned64(const char* key, std::uint64_t def) {
    if (!take(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(where(key) + ": expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string string(const char* key, std::string def) {
    if (!take(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> reals(const char* key, std::vector<double> def) {
    if (!take(key)) return def;
    return as_reals(j_.at(key), where(key));
  }

  std::vector<int> integers(const char* key, std::vector<int> def) {
    if (!take(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], where(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strings(const char* key, std::vector<std::string> def) {
    if (!take(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
      if (!s.is_string()) throw ConfigError(where(key) + ": expected an array of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  }

  const json& raw(const char* key) {
    take(key);
    return j_.at(key);
  }

  std::optional<Block> child(const char* key) {
    if (!take(key)) return std::nullopt;
    return Block(j_.at(key), where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key().c_str()) + ": unknown key");
    }
  }

  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config" : path_;
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  static int as_int(const json& v, const std::string& at) {
    if (!v.is_number_integer()) throw ConfigError(at + ": expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(at + ": integer out of range");
    return static_cast<int>(x);
  }

  static std::vector<double> as_reals(const json& v, const std::string& at) {
    if (!v.is_array()) throw ConfigError(at + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(at + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

 private:
  bool take(const char* key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelSpec parse_model(Block& b) {
  if (!b.has("K")) throw ConfigError(b.where("K") + ": required");
  if (!b.has("alpha")) throw ConfigError(b.where("alpha") + ": required");
  if (!b.has("mu")) throw ConfigError(b.where("mu") + ": required");
  const int k = b.integer("K", 0);
  ModelSpec spec;
  spec.alpha = b.reals("alpha", {});
  const json& mu = b.raw("mu");
  if (mu.is_array() && !mu.empty() && mu[0].is_array()) {
    // full K x K coupling matrix
    Matrix full(mu.size(), mu.size());
    for (std::size_t r = 0; r < mu.size(); ++r) {
      const auto row = Block::as_reals(mu[r], b.where("mu") + "[" + std::to_string(r) + "]");
      if (row.size() != mu.size()) throw ConfigError(b.where("mu") + ": coupling matrix must be square");
      for (std::size_t s = 0; s < row.size(); ++s) full(r, s) = row[s];
    }
    try {
      spec.mu = superdiagonal_from_full(full);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(b.where("mu") + ": " + e.what());
    }
  } else {
    spec.mu = Block::as_reals(mu, b.where("mu"));
  }
  spec.h = b.reals("h", std::vector<double>(std::max(k, 0), 0.0));
  b.finish();
  if (k != spec.layers()) {
    throw ConfigError(b.where("K") + ": K = " + std::to_string(k) + " but alpha has " +
                      std::to_string(spec.layers()) + " entries");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(b.where() + ": " + e.what());
  }
  return spec;
}

const char* scheme_name(QuadratureScheme s) {
  return s == QuadratureScheme::GaussHermite ? "gauss_hermite" : "graded_legendre";
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void validate_config(const RunConfig& c) {
  require(c.schema_version == kSchemaVersion,
          "schema_version: unsupported version " + std::to_string(c.schema_version) + " (expected " +
              std::to_string(kSchemaVersion) + ")");
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  require(c.quadrature.order >= 2, "quadrature.order: must be >= 2");
  require(c.run.threads >= 0, "run.threads: must be >= 0");

  require(!c.solve.methods.empty(), "solve.methods: must not be empty");
  for (const auto& m : c.solve.methods) {
    require(m == "auto" || m == "fixed_point" || m == "pi_ascent" || m == "nested_bisection",
            "solve.methods: unknown method '" + m + "'");
  }
  require(c.solve.tol > 0.0, "solve.tol: must be > 0");
  require(c.solve.max_iterations > 0, "solve.max_iterations: must be > 0");
  require(c.solve.damping > 0.0 && c.solve.damping <= 1.0, "solve.damping: must lie in (0, 1]");
  require(c.solve.nested_max_layers >= 2, "solve.nested_max_layers: must be >= 2");

  require(c.scan.axis == "mu_edge" || c.scan.axis == "alpha_simplex" || c.scan.axis == "h_uniform",
          "scan.axis: expected mu_edge, alpha_simplex or h_uniform");
  require(c.scan.edge >= 1 && c.scan.edge < c.model.layers(),
          "scan.edge: must lie in 1..K-1 (edge r couples layers r and r+1)");
  require(c.scan.tol > 0.0, "scan.tol: must be > 0");
  if (c.scan.values.empty()) {
    require(c.scan.step > 0.0 && c.scan.stop >= c.scan.start, "scan: need step > 0 and stop >= start");
  }
  require(c.scan.alpha_steps >= 1, "scan.alpha_steps: must be >= 1");
  for (const auto& row : c.scan.alpha_rows) {
    require(static_cast<int>(row.size()) == c.model.layers(), "scan.alpha_rows: each row needs K entries");
  }

  require(c.optimize_alpha.grid >= 1, "optimize_alpha.grid: must be >= 1");

  require(c.simulate.engine == "block_gibbs" || c.simulate.engine == "enumeration",
          "simulate.engine: expected block_gibbs or enumeration");
  require(c.simulate.n >= c.model.layers(), "simulate.n: need at least one spin per layer");
  require(c.simulate.engine != "enumeration" || c.simulate.n <= kEnumerationCap,
          "simulate.n: enumeration is limited to N <= " + std::to_string(kEnumerationCap));
  require(c.simulate.n_disorder >= 1, "simulate.n_disorder: must be >= 1");
  require(c.simulate.burn_in >= 0 && c.simulate.sweeps > c.simulate.burn_in,
          "simulate: need sweeps > burn_in >= 0");
  require(c.simulate.replicas >= 2, "simulate.replicas: must be >= 2");
  require(c.simulate.batches >= 2, "simulate.batches: must be >= 2");

  require(!c.enumerate.sizes.empty(), "enumerate.sizes: must not be empty");
  for (int n : c.enumerate.sizes) {
    require(n >= c.model.layers() && n <= kEnumerationCap,
            "enumerate.sizes: each N must lie in K.." + std::to_string(kEnumerationCap));
  }
  require(c.enumerate.n_disorder >= 2, "enumerate.n_disorder: must be >= 2");

  require(c.verify.random_specs >= 1, "verify.random_specs: must be >= 1");
  require(c.verify.disorder_samples >= 2, "verify.disorder_samples: must be >= 2");
  require(c.verify.enumeration_n >= 2 && c.verify.enumeration_n <= kEnumerationCap,
          "verify.enumeration_n: must lie in 2.." + std::to_string(kEnumerationCap));

  const auto& q = c.quadrature_check;
  require(q.h_min > 0.0 && q.h_max > q.h_min, "quadrature_check: need 0 < h_min < h_max");
  require(q.points >= 2, "quadrature_check.points: must be >= 2");
  require(!q.moments.empty(), "quadrature_check.moments: must not be empty");
  for (int n : q.moments) require(n >= 1, "quadrature_check.moments: entries must be >= 1");
  require(q.threshold > 0.0, "quadrature_check.threshold: must be > 0");
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Block root(doc, "");
  RunConfig c;
  if (!root.has("schema_version")) throw ConfigError("schema_version: required");
  c.schema_version = root.integer("schema_version", 0);
  require(c.schema_version == kSchemaVersion, "schema_version: unsupported version " +
                                                  std::to_string(c.schema_version) + " (expected " +
                                                  std::to_string(kSchemaVersion) + ")");
  if (auto b = root.child("model")) {
    c.model = parse_model(*b);
  } else {
    throw ConfigError("model: required");
  }
  if (auto b = root.child("quadrature")) {
    const auto scheme = b->string("scheme", scheme_name(c.quadrature.scheme));
    if (scheme == "graded_legendre") {
      c.quadrature.scheme = QuadratureScheme::GradedLegendre;
    } else if (scheme == "gauss_hermite") {
      c.quadrature.scheme = QuadratureScheme::GaussHermite;
      c.quadrature.order = 200;
    } else {
      throw ConfigError("quadrature.scheme: expected graded_legendre or gauss_hermite");
    }
    c.quadrature.order = b->integer("order", c.quadrature.order);
    b->finish();
  }
  if (auto b = root.child("run")) {
    c.run.seed = b->unsigned64("seed", c.run.seed);
    c.run.threads = b->integer("threads", c.run.threads);
    c.run.out = b->string("out", c.run.out);
    b->finish();
  }
  if (auto b = root.child("solve")) {
    c.solve.methods = b->strings("methods", c.solve.methods);
    c.solve.tol = b->real("tol", c.solve.tol);
    c.solve.max_iterations = b->integer("max_iterations", c.solve.max_iterations);
    c.solve.damping = b->real("damping", c.solve.damping);
    c.solve.nested_max_layers = b->integer("nested_max_layers", c.solve.nested_max_layers);
    b->finish();
  }
  if (auto b = root.child("scan")) {
    c.scan.axis = b->string("axis", c.scan.axis);
    c.scan.edge = b->integer("edge", c.scan.edge);
    c.scan.start = b->real("start", c.scan.start);
    c.scan.stop = b->real("stop", c.scan.stop);
    c.scan.step = b->real("step", c.scan.step);
    c.scan.values = b->reals("values", c.scan.values);
    c.scan.alpha_steps = b->integer("alpha_steps", c.scan.alpha_steps);
    if (b->has("alpha_rows")) {
      const json& rows = b->raw("alpha_rows");
      if (!rows.is_array()) throw ConfigError("scan.alpha_rows: expected an array of arrays");
      c.scan.alpha_rows.clear();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        c.scan.alpha_rows.push_back(Block::as_reals(rows[i], "scan.alpha_rows[" + std::to_string(i) + "]"));
      }
    }
    c.scan.tol = b->real("tol", c.scan.tol);
    b->finish();
  }
  if (auto b = root.child("optimize_alpha")) {
    c.optimize_alpha.grid = b->integer("grid", c.optimize_alpha.grid);
    b->finish();
  }
  if (auto b = root.child("simulate")) {
    c.simulate.engine = b->string("engine", c.simulate.engine);
    c.simulate.n = b->integer("n", c.simulate.n);
    c.simulate.n_disorder = b->integer("n_disorder", c.simulate.n_disorder);
    c.simulate.sweeps = b->integer("sweeps", c.simulate.sweeps);
    c.simulate.burn_in = b->integer("burn_in", c.simulate.burn_in);
    c.simulate.replicas = b->integer("replicas", c.simulate.replicas);
    c.simulate.batches = b->integer("batches", c.simulate.batches);
    b->finish();
  }
  if (auto b = root.child("enumerate")) {
    c.enumerate.sizes = b->integers("sizes", c.enumerate.sizes);
    c.enumerate.n_disorder = b->integer("n_disorder", c.enumerate.n_disorder);
    b->finish();
  }
  if (auto b = root.child("verify")) {
    c.verify.random_specs = b->integer("random_specs", c.verify.random_specs);
    c.verify.disorder_samples = b->integer("disorder_samples", c.verify.disorder_samples);
    c.verify.enumeration_n = b->integer("enumeration_n", c.verify.enumeration_n);
    b->finish();
  }
  if (auto b = root.child("quadrature_check")) {
    auto& q = c.quadrature_check;
    q.h_min = b->real("h_min", q.h_min);
    q.h_max = b->real("h_max", q.h_max);
    q.points = b->integer("points", q.points);
    q.moments = b->integers("moments", q.moments);
    q.threshold = b->real("threshold", q.threshold);
    b->finish();
  }
  root.finish();
  validate_config(c);
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["model"] = {{"K", c.model.layers()}, {"alpha", c.model.alpha}, {"mu", c.model.mu}, {"h", c.model.h}};
  j["quadrature"] = {{"scheme", scheme_name(c.quadrature.scheme)}, {"order", c.quadrature.order}};
  j["run"] = {{"seed", c.run.seed}, {"threads", c.run.threads}, {"out", c.run.out}};
  j["solve"] = {{"methods", c.solve.methods},
                {"tol", c.solve.tol},
                {"max_iterations", c.solve.max_iterations},
                {"damping", c.solve.damping},
                {"nested_max_layers", c.solve.nested_max_layers}};
  j["scan"] = {{"axis", c.scan.axis},          {"edge", c.scan.edge},
               {"start", c.scan.start},        {"stop", c.scan.stop},
               {"step", c.scan.step},          {"values", c.scan.values},
               {"alpha_steps", c.scan.alpha_steps}, {"alpha_rows", c.scan.alpha_rows},
               {"tol", c.scan.tol}};
  j["optimize_alpha"] = {{"grid", c.optimize_alpha.grid}};
  j["simulate"] = {{"engine", c.simulate.engine},   {"n", c.simulate.n},
                   {"n_disorder", c.simulate.n_disorder}, {"sweeps", c.simulate.sweeps},
                   {"burn_in", c.simulate.burn_in}, {"replicas", c.simulate.replicas},
                   {"batches", c.simulate.batches}};
  j["enumerate"] = {{"sizes", c.enumerate.sizes}, {"n_disorder", c.enumerate.n_disorder}};
  j["verify"] = {{"random_specs", c.verify.random_specs},
                 {"disorder_samples", c.verify.disorder_samples},
                 {"enumeration_n", c.verify.enumeration_n}};
  const auto& q = c.quadrature_check;
  j["quadrature_check"] = {{"h_min", q.h_min},
                           {"h_max", q.h_max},
                           {"points", q.points},
                           {"moments", q.moments},
                           {"threshold", q.threshold}};
  return j.dump(2);
}

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.seed) c.run.seed = *o.seed;
  if (o.threads) c.run.threads = *o.threads;
  if (o.out) c.run.out = *o.out;
  if (o.tol) c.solve.tol = c.scan.tol = *o.tol;
  validate_config(c);
}

// ---- CSV -------------------------------------------------------------------------

std::string csv_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

CsvWriter& CsvWriter::row() {
  rows_.emplace_back();
  return *this;
}

CsvWriter& CsvWriter::add(double v) { return add(csv_real(v)); }
CsvWriter& CsvWriter::add(int v) { return add(std::to_string(v)); }
CsvWriter& CsvWriter::add(std::uint64_t v) { return add(std::to_string(v)); }

CsvWriter& CsvWriter::add(const std::string& v) {
  if (rows_.empty()) row();
  if (v.find_first_of(",\"\n") == std::string::npos) {
    rows_.back().push_back(v);
  } else {
    std::string q = "\"";
    for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    rows_.back().push_back(q + "\"");
  }
  return *this;
}

std::string CsvWriter::str() const {
  std::string s;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    s += '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) throw std::logic_error("csv row width does not match header");
    line(r);
  }
  return s;
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << str();
}

}  // namespace dbm::cli
