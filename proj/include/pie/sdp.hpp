#ifndef PIE_SDP_HPP_
#define PIE_SDP_HPP_

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pie {

// Linear SDP over scalar decision variables.  Variables are the upper-triangle
// entries of named PSD blocks (row-major: (0,0),(0,1),...,(1,1),...) plus free
// scalars.  Free-variable ids live above kFreeBase so blocks and frees can be
// declared in any order; serialization densifies ids as [block entries, frees].
struct SdpProblem {
  static constexpr int kFreeBase = 1 << 28;

  struct Block {
    std::string name;
    int size = 0;
    int offset = 0;  // first dense variable id of this block
  };
  struct Row {
    std::vector<std::pair<int, double>> terms;
    double rhs = 0.0;
  };

  std::vector<Block> blocks;
  std::vector<std::string> free_names;
  int block_vars = 0;
  std::vector<Row> equalities;
  std::vector<std::pair<int, double>> objective;

  int n_vars() const { return block_vars + int(free_names.size()); }

  int add_block(const std::string& name, int size) {
    if (size <= 0) throw std::invalid_argument("SdpProblem: block size must be positive");
    blocks.push_back(Block{name, size, block_vars});
    block_vars += size * (size + 1) / 2;
    return int(blocks.size()) - 1;
  }

  int entry_var(int block, int i, int j) const {
    const Block& b = blocks.at(block);
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= b.size) throw std::out_of_range("SdpProblem: block entry out of range");
    int skip = i * b.size - i * (i - 1) / 2;  // row-major upper triangle
    return b.offset + skip + (j - i);
  }

  int add_free(const std::string& name) {
    free_names.push_back(name);
    return kFreeBase + int(free_names.size()) - 1;
  }

  static bool is_free(int var) { return var >= kFreeBase; }

  int dense_id(int var) const {
    if (is_free(var)) {
      int k = var - kFreeBase;
      if (k >= int(free_names.size())) throw std::out_of_range("SdpProblem: free variable id out of range");
      return block_vars + k;
    }
    if (var < 0 || var >= block_vars) throw std::out_of_range("SdpProblem: variable id out of range");
    return var;
  }

  // Locate the block and (i,j) of a block-entry variable.
  void locate(int var, int& block, int& i, int& j) const {
    if (is_free(var)) throw std::invalid_argument("SdpProblem: variable is free, not a block entry");
    for (int b = int(blocks.size()) - 1; b >= 0; --b) {
      if (var >= blocks[b].offset) {
        block = b;
        int rel = var - blocks[b].offset;
        int n = blocks[b].size;
        i = 0;
        while (rel >= n - i) {
          rel -= n - i;
          ++i;
        }
        j = i + rel;
        return;
      }
    }
    throw std::out_of_range("SdpProblem: variable id out of range");
  }

  void check() const {
    auto check_terms = [&](const std::vector<std::pair<int, double>>& terms) {
      for (auto& [v, c] : terms) (void)dense_id(v), (void)c;
    };
    for (const Row& r : equalities) check_terms(r.terms);
    check_terms(objective);
  }
};

enum class SdpStatus { Solved, Infeasible, Unbounded, Failure };

// Values are indexed densely: block entries in declaration order, then frees;
// resolve a problem variable id through SdpProblem::dense_id.
struct SdpSolution {
  SdpStatus status = SdpStatus::Failure;
  std::vector<double> values;
  double objective = 0.0;
  double eq_residual = 0.0;
  double psd_residual = 0.0;
  std::string message;
};

inline double solution_value(const SdpProblem& p, const SdpSolution& s, int var) {
  return s.values.at(p.dense_id(var));
}

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Solved: return "solved";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    default: return "failure";
  }
}

// --- SDPA sparse interchange ------------------------------------------------
//
// The problem is written in SDPA's primal view: maximize tr(F0 X) subject to
// tr(Fi X) = c_i with X psd and block-diagonal.  Our PSD blocks map directly;
// each free scalar becomes a +/- pair on a diagonal block; the minimization
// objective enters negated through F0.  Off-diagonal coefficients are halved
// so the symmetric trace pairing reproduces them.

struct SdpaEntry {
  int matno, blkno, i, j;  // 1-based per the format
  double value;
  bool operator==(const SdpaEntry& o) const {
    return matno == o.matno && blkno == o.blkno && i == o.i && j == o.j && value == o.value;
  }
};

struct SdpaData {
  int m = 0;
  std::vector<int> block_struct;  // negative = diagonal block
  std::vector<double> c;
  std::vector<SdpaEntry> entries;
  bool operator==(const SdpaData& o) const {
    return m == o.m && block_struct == o.block_struct && c == o.c && entries == o.entries;
  }
};

inline SdpaData sdpa_data(const SdpProblem& p) {
  p.check();
  SdpaData d;
  d.m = int(p.equalities.size());
  for (const auto& b : p.blocks) d.block_struct.push_back(b.size);
  int n_free = int(p.free_names.size());
  if (n_free > 0) d.block_struct.push_back(-2 * n_free);
  for (const auto& row : p.equalities) d.c.push_back(row.rhs);

  int free_blk = int(p.blocks.size()) + 1;  // 1-based
  auto emit = [&](int matno, int var, double coef) {
    if (coef == 0.0) return;
    if (SdpProblem::is_free(var)) {
      int k = var - SdpProblem::kFreeBase;
      d.entries.push_back({matno, free_blk, 2 * k + 1, 2 * k + 1, coef});
      d.entries.push_back({matno, free_blk, 2 * k + 2, 2 * k + 2, -coef});
    } else {
      int b, i, j;
      p.locate(var, b, i, j);
      double v = (i == j) ? coef : 0.5 * coef;
      d.entries.push_back({matno, b + 1, i + 1, j + 1, v});
    }
  };
  for (auto& [v, c] : p.objective) emit(0, v, -c);
  for (int r = 0; r < d.m; ++r)
    for (auto& [v, c] : p.equalities[r].terms) emit(r + 1, v, c);
  return d;
}

inline void export_sdpa(const SdpProblem& p, std::ostream& out) {
  SdpaData d = sdpa_data(p);
  char buf[64];
  out << d.m << " =mDIM\n";
  out << d.block_struct.size() << " =nBLOCK\n";
  for (std::size_t i = 0; i < d.block_struct.size(); ++i)
    out << d.block_struct[i] << (i + 1 < d.block_struct.size() ? ' ' : '\n');
  if (d.block_struct.empty()) out << '\n';
  for (std::size_t i = 0; i < d.c.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d.c[i]);
    out << buf << (i + 1 < d.c.size() ? ' ' : '\n');
  }
  if (d.c.empty()) out << '\n';
  for (const SdpaEntry& e : d.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << e.matno << ' ' << e.blkno << ' ' << e.i << ' ' << e.j << ' ' << buf << '\n';
  }
}

inline SdpaData parse_sdpa(std::istream& in) {
  // header lines are positional (a blank line is an empty list); comment
  // lines starting with '"' or '*' are skipped everywhere
  auto next_line = [&](std::string& line, bool allow_blank) {
    while (std::getline(in, line)) {
      std::size_t pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos) {
        if (allow_blank) return true;
        continue;
      }
      if (line[pos] == '"' || line[pos] == '*') continue;
      return true;
    }
    return false;
  };
  SdpaData d;
  std::string line;
  if (!next_line(line, false)) throw std::invalid_argument("sdpa: missing mDIM");
  d.m = std::stoi(line);
  if (!next_line(line, false)) throw std::invalid_argument("sdpa: missing nBLOCK");
  int nblock = std::stoi(line);
  if (!next_line(line, true)) throw std::invalid_argument("sdpa: missing block structure");
  {
    std::istringstream ss(line);
    int v;
    while (ss >> v) d.block_struct.push_back(v);
    if (int(d.block_struct.size()) != nblock)
      throw std::invalid_argument("sdpa: block structure count mismatch");
  }
  if (!next_line(line, true)) throw std::invalid_argument("sdpa: missing c vector");
  {
    std::istringstream ss(line);
    double v;
    while (ss >> v) d.c.push_back(v);
    if (int(d.c.size()) != d.m) throw std::invalid_argument("sdpa: c vector length mismatch");
  }
  while (next_line(line, false)) {
    std::istringstream ss(line);
    SdpaEntry e;
    if (!(ss >> e.matno >> e.blkno >> e.i >> e.j >> e.value))
      throw std::invalid_argument("sdpa: malformed entry line: " + line);
    d.entries.push_back(e);
  }
  return d;
}

// --- JSON interchange with the solver adapter -------------------------------

inline nlohmann::json to_json(const SdpProblem& p) {
  p.check();
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.blocks) blocks.push_back({{"name", b.name}, {"size", b.size}});
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto& r : p.equalities) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& [v, c] : r.terms) terms.push_back({p.dense_id(v), c});
    eqs.push_back({{"terms", terms}, {"rhs", r.rhs}});
  }
  nlohmann::json obj = nlohmann::json::array();
  for (auto& [v, c] : p.objective) obj.push_back({p.dense_id(v), c});
  return {{"schema", "sdp-1"},
          {"blocks", blocks},
          {"n_free", int(p.free_names.size())},
          {"equalities", eqs},
          {"objective", obj}};
}

}  // namespace pie

#endif  // PIE_SDP_HPP_
