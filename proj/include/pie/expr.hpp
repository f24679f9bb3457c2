#ifndef PIE_EXPR_HPP_
#define PIE_EXPR_HPP_

#include <cctype>
#include <stdexcept>
#include <string>

#include "pie/poly.hpp"

namespace pie {

// Recursive-descent parser for polynomial coefficient strings, e.g.
// "3 + (s^2 + 0.2)" or "0.5*s^2 - s" or "(s^2 - 2*s)/2".
// Identifiers: s, theta.  Operators: + - * / ^ and parentheses; '^' takes a
// non-negative integer power; '/' requires a constant divisor.
class PolyParser {
 public:
  PolyParser(std::string text, Domain dom) : text_(std::move(text)), dom_(dom) {}

  PolyScalar parse() {
    pos_ = 0;
    PolyScalar r = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return r;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("polynomial parse error at position " + std::to_string(pos_) +
                                " in \"" + text_ + "\": " + msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  PolyScalar parse_expr() {
    PolyScalar acc = parse_term();
    while (true) {
      if (consume('+')) acc = acc + parse_term();
      else if (consume('-')) acc = acc - parse_term();
      else return acc;
    }
  }

  PolyScalar parse_term() {
    PolyScalar acc = parse_factor();
    while (true) {
      if (consume('*')) {
        acc = acc * parse_factor();
      } else if (consume('/')) {
        PolyScalar d = parse_factor();
        if (d.total_degree() != 0) fail("division by a non-constant polynomial");
        double c = d.eval(0.0, 0.0);
        if (c == 0.0) fail("division by zero");
        acc = acc.scaled(1.0 / c);
      } else {
        return acc;
      }
    }
  }

  PolyScalar parse_factor() {
    PolyScalar base = parse_primary();
    if (consume('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent after '^'");
      int e = std::stoi(text_.substr(start, pos_ - start));
      PolyScalar acc(1.0, dom_);
      for (int i = 0; i < e; ++i) acc = acc * base;
      return acc;
    }
    return base;
  }

  PolyScalar parse_primary() {
    skip_ws();
    if (consume('-')) return parse_factor().scaled(-1.0);
    if (consume('(')) {
      PolyScalar inner = parse_expr();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_, len = 0;
      double v = std::stod(text_.substr(start), &len);
      pos_ = start + len;
      return PolyScalar(v, dom_);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      std::string id = text_.substr(start, pos_ - start);
      if (id == "s") return PolyScalar::var_s(dom_);
      if (id == "theta") return PolyScalar::var_theta(dom_);
      fail("unknown identifier '" + id + "'");
    }
    fail("expected number, variable, or '('");
  }

  std::string text_;
  Domain dom_;
  std::size_t pos_ = 0;
};

inline PolyScalar parse_poly(const std::string& text, Domain dom) {
  return PolyParser(text, dom).parse();
}

// Matrix-valued entry list: rows separated by ';', columns by ','.
inline PolyMatrix parse_poly_matrix(const std::string& text, Domain dom) {
  std::vector<std::vector<PolyScalar>> rows;
  std::size_t row_start = 0;
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || (s[i] == sep && depth == 0)) {
        out.push_back(s.substr(start, i - start));
        start = i + 1;
      } else if (s[i] == '(') {
        ++depth;
      } else if (s[i] == ')') {
        --depth;
      }
    }
    return out;
  };
  (void)row_start;
  std::size_t cols = 0;
  for (const std::string& row_text : split(text, ';')) {
    std::vector<PolyScalar> row;
    for (const std::string& cell : split(row_text, ',')) row.push_back(parse_poly(cell, dom));
    if (cols == 0) cols = row.size();
    else if (cols != row.size()) throw std::invalid_argument("ragged polynomial matrix: " + text);
    rows.push_back(std::move(row));
  }
  PolyMatrix m(int(rows.size()), int(cols), dom);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m.at(int(i), int(j)) = rows[i][j];
  return m;
}

}  // namespace pie

#endif  // PIE_EXPR_HPP_
