#ifndef PIE_CONFIG_HPP_
#define PIE_CONFIG_HPP_

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pie/expr.hpp"
#include "pie/gpde.hpp"

namespace pie {

// Flat sectioned key-value file: [section] headers, key = value lines,
// '#' comments.  Repeated keys (e.g. bc rows) keep their order.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in) {
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::invalid_argument("config line " + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.entries_[section].emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    return parse(in);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto it = entries_.find(section);
    if (it == entries_.end()) return false;
    for (auto& [k, v] : it->second)
      if (k == key) return true;
    return false;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto it = entries_.find(section);
    if (it != entries_.end())
      for (auto& [k, v] : it->second)
        if (k == key) return v;
    throw std::invalid_argument("config: missing key [" + section + "] " + key);
  }

  std::string get_or(const std::string& section, const std::string& key, const std::string& dflt) const {
    return has(section, key) ? get(section, key) : dflt;
  }

  double get_num(const std::string& section, const std::string& key) const {
    return std::stod(get(section, key));
  }
  double get_num_or(const std::string& section, const std::string& key, double dflt) const {
    return has(section, key) ? get_num(section, key) : dflt;
  }

  std::vector<std::string> get_all(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    auto it = entries_.find(section);
    if (it != entries_.end())
      for (auto& [k, v] : it->second)
        if (k == key) out.push_back(v);
    return out;
  }

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> entries_;
};

// Simulation settings carried alongside a GPDE description.
struct SimSpec {
  PolyMatrix ic;       // initial PDE state, n_x x 1 in s (may be empty)
  double u0 = 1.0;     // scaling of the H2-style initial condition
  bool has_ic = false;
};

struct GpdeConfig {
  GpdeSystem sys;
  SimSpec sim;
};

inline Eigen::MatrixXd parse_numeric_rows(const std::vector<std::string>& rows, int expected_cols,
                                          const std::string& what) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(int(rows.size()), expected_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::istringstream ss(rows[i]);
    double v;
    int j = 0;
    while (ss >> v) {
      if (j >= expected_cols) throw std::invalid_argument(what + ": too many entries in row");
      m(int(i), j++) = v;
    }
    if (j != expected_cols)
      throw std::invalid_argument(what + ": expected " + std::to_string(expected_cols) + " entries per row");
  }
  return m;
}

inline GpdeConfig gpde_from_config(const ConfigFile& cfg) {
  GpdeConfig out;
  GpdeSystem& g = out.sys;
  g.dom = Domain{cfg.get_num("domain", "a"), cfg.get_num("domain", "b")};
  if (!(g.dom.a < g.dom.b)) throw std::invalid_argument("domain: requires a < b");
  g.n_x = int(cfg.get_num_or("states", "count", 1));
  g.order = int(cfg.get_num_or("states", "order", 2));
  if (g.order < 1 || g.order > 2) throw std::invalid_argument("states: order must be 1 or 2");

  auto poly_or_zero = [&](const std::string& sec, const std::string& key, int rows, int cols) {
    if (!cfg.has(sec, key)) return PolyMatrix(rows, cols, g.dom);
    PolyMatrix m = parse_poly_matrix(cfg.get(sec, key), g.dom);
    if (m.rows() != rows || m.cols() != cols)
      throw std::invalid_argument("[" + sec + "] " + key + ": expected " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
    return m;
  };

  for (int i = 0; i <= g.order; ++i)
    g.A.push_back(poly_or_zero("dynamics", "A" + std::to_string(i), g.n_x, g.n_x));

  auto input_map = [&](const std::string& key) {
    if (!cfg.has("dynamics", key)) return PolyMatrix(g.n_x, 0, g.dom);
    PolyMatrix m = parse_poly_matrix(cfg.get("dynamics", key), g.dom);
    if (m.rows() != g.n_x) throw std::invalid_argument("[dynamics] " + key + ": wrong state width");
    return m;
  };
  g.b1 = input_map("B1");
  g.b2 = input_map("B2");

  auto bc_rows = cfg.get_all("bcs", "row");
  if (int(bc_rows.size()) != g.order * g.n_x)
    throw std::invalid_argument("bcs: need exactly N*n_x rows, got " + std::to_string(bc_rows.size()));
  g.Bb = parse_numeric_rows(bc_rows, g.trace_width(), "bcs");

  // regulated outputs
  int nz = 0;
  std::vector<PolyMatrix> cz_blocks;
  for (int i = 0; i <= g.order; ++i) {
    std::string key = i == 0 ? "Cz" : "Cz" + std::to_string(i);
    if (cfg.has("outputs", key)) {
      PolyMatrix m = parse_poly_matrix(cfg.get("outputs", key), g.dom);
      if (m.cols() != g.n_x) throw std::invalid_argument("[outputs] " + key + ": wrong state width");
      nz = std::max(nz, m.rows());
      cz_blocks.push_back(m);
    } else {
      cz_blocks.push_back(PolyMatrix(0, g.n_x, g.dom));
    }
  }
  Eigen::MatrixXd d12;
  if (cfg.has("outputs", "D12")) {
    PolyMatrix m = parse_poly_matrix(cfg.get("outputs", "D12"), g.dom);
    d12 = m.eval(0.0, 0.0);
    nz = std::max(nz, int(d12.rows()));
  }
  int nu = g.b2.cols();
  g.D12 = Eigen::MatrixXd::Zero(nz, nu);
  if (d12.size() > 0) {
    if (int(d12.rows()) != nz || int(d12.cols()) != nu)
      throw std::invalid_argument("[outputs] D12: expected " + std::to_string(nz) + "x" + std::to_string(nu));
    g.D12 = d12;
  }
  for (int i = 0; i <= g.order; ++i) {
    PolyMatrix m(nz, g.n_x, g.dom);
    m.set_block(0, 0, cz_blocks[i]);
    if (cz_blocks[i].rows() != 0 && cz_blocks[i].rows() != nz)
      throw std::invalid_argument("[outputs] Cz blocks must all have nz rows");
    g.Cz.push_back(m);
  }

  // observed outputs
  auto cy_rows = cfg.get_all("outputs", "Cy");
  int ny = int(cy_rows.size());
  g.Cy = parse_numeric_rows(cy_rows, g.trace_width(), "outputs Cy");
  int nw = g.b1.cols();
  g.D21 = Eigen::MatrixXd::Zero(ny, nw);
  if (cfg.has("outputs", "D21")) {
    PolyMatrix m = parse_poly_matrix(cfg.get("outputs", "D21"), g.dom);
    Eigen::MatrixXd d21 = m.eval(0.0, 0.0);
    if (int(d21.rows()) != ny || int(d21.cols()) != nw)
      throw std::invalid_argument("[outputs] D21: expected " + std::to_string(ny) + "x" + std::to_string(nw));
    g.D21 = d21;
  }

  if (cfg.has("sim", "ic")) {
    PolyMatrix ic = parse_poly_matrix(cfg.get("sim", "ic"), g.dom);
    if (ic.rows() != g.n_x || ic.cols() != 1)
      throw std::invalid_argument("[sim] ic: expected a state-width column");
    out.sim.ic = ic;
    out.sim.has_ic = true;
  }
  out.sim.u0 = cfg.get_num_or("sim", "u0", 1.0);

  g.check();
  return out;
}

inline GpdeConfig load_gpde_config(const std::string& path) {
  return gpde_from_config(ConfigFile::load(path));
}

}  // namespace pie

#endif  // PIE_CONFIG_HPP_
