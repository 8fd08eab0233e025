#include "parabolic/instance_io.h"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "parabolic/errors.h"

namespace parabolic::io {

namespace {

using json = nlohmann::json;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::pair<int, int> line_column(const std::string& text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

QcqpInstance make_instance(int n, int m, QuadForm obj, std::vector<QuadForm> eqs,
                           std::vector<QuadForm> ineqs, std::optional<Bounds> bounds) {
  try {
    return QcqpInstance(n, m, std::move(obj), std::move(eqs), std::move(ineqs), std::move(bounds));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
}

QuadForm make_form(int n, int m, const std::vector<Triplet>& a, const std::vector<Triplet>& b,
                   double c) {
  SparseMatrix A(n, n), B(n, m);
  A.setFromTriplets(a.begin(), a.end());
  B.setFromTriplets(b.begin(), b.end());
  try {
    return QuadForm(std::move(A), std::move(B), c);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
}

// ---------------------------------------------------------------- native JSON

json number_or_inf(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

double read_bound(const json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw SchemaError("bound must be a number, \"inf\" or \"-inf\"");
  }
  return v.get<double>();
}

json form_to_json(const QuadForm& q) {
  json a = json::array(), b = json::array();
  for (int k = 0; k < q.A().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(q.A(), k); it; ++it) {
      if (it.row() <= it.col()) a.push_back({it.row(), it.col(), it.value()});
    }
  }
  for (int k = 0; k < q.B().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(q.B(), k); it; ++it) {
      b.push_back({it.row(), it.col(), it.value()});
    }
  }
  return {{"A", a}, {"B", b}, {"c", q.c()}};
}

QuadForm form_from_json(const json& j, int n, int m, const std::string& where) {
  std::vector<Triplet> a, b;
  for (const auto& t : j.at("A")) {
    const int i = t.at(0).get<int>(), k = t.at(1).get<int>();
    const double v = t.at(2).get<double>();
    if (i < 0 || k < 0 || i >= n || k >= n) throw SchemaError(where + ": A index out of range");
    if (i > k) throw SchemaError(where + ": A triplets must have i <= j");
    a.emplace_back(i, k, v);
    if (i != k) a.emplace_back(k, i, v);
  }
  for (const auto& t : j.at("B")) {
    const int i = t.at(0).get<int>(), k = t.at(1).get<int>();
    if (i < 0 || k < 0 || i >= n || k >= m) throw SchemaError(where + ": B index out of range");
    b.emplace_back(i, k, t.at(2).get<double>());
  }
  return make_form(n, m, a, b, j.at("c").get<double>());
}

InstanceDocument parse_native(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ParseError(e.what(), line, col);
  }
  try {
    if (j.at("schema").get<std::string>() != kSchemaName) {
      throw SchemaError("unknown schema name");
    }
    if (j.at("version").get<int>() != kSchemaVersion) {
      throw SchemaError("unsupported schema version " + j.at("version").dump());
    }
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    if (n < 1 || m < 1) throw SchemaError("n and m must be positive");
    QuadForm obj = form_from_json(j.at("objective"), n, m, "objective");
    std::vector<QuadForm> eqs, ineqs;
    for (size_t k = 0; k < j.at("equalities").size(); ++k) {
      eqs.push_back(form_from_json(j["equalities"][k], n, m, "equality " + std::to_string(k)));
    }
    for (size_t k = 0; k < j.at("inequalities").size(); ++k) {
      ineqs.push_back(
          form_from_json(j["inequalities"][k], n, m, "inequality " + std::to_string(k)));
    }
    std::optional<Bounds> bounds;
    if (j.contains("bounds")) {
      const auto& lo = j["bounds"].at("lower");
      const auto& up = j["bounds"].at("upper");
      if (static_cast<int>(lo.size()) != n || static_cast<int>(up.size()) != n) {
        throw SchemaError("bounds must have n entries");
      }
      Bounds bd{Vector(n), Vector(n)};
      for (int i = 0; i < n; ++i) {
        bd.lower(i) = read_bound(lo[i]);
        bd.upper(i) = read_bound(up[i]);
      }
      bounds = std::move(bd);
    }
    InstanceDocument doc{j.value("name", std::string()),
                         make_instance(n, m, std::move(obj), std::move(eqs), std::move(ineqs),
                                       std::move(bounds)),
                         std::nullopt, std::nullopt};
    if (j.contains("reference")) {
      const auto& ref = j["reference"];
      if (ref.contains("objective")) doc.reference_objective = ref["objective"].get<double>();
      if (ref.contains("solution")) {
        const auto& rows = ref["solution"];
        if (static_cast<int>(rows.size()) != n) throw SchemaError("reference solution needs n rows");
        Matrix Y(n, m);
        for (int i = 0; i < n; ++i) {
          if (static_cast<int>(rows[i].size()) != m) {
            throw SchemaError("reference solution needs m columns");
          }
          for (int c = 0; c < m; ++c) Y(i, c) = rows[i][c].get<double>();
        }
        doc.reference_solution = std::move(Y);
      }
    }
    return doc;
  } catch (const json::exception& e) {
    throw SchemaError(e.what());
  }
}

// ---------------------------------------------------------------------- QPLIB

struct Token {
  std::string text;
  int line;
  int column;
};

// Data lines of a QPLIB file. Each record occupies one line; trailing text after
// the fields a record needs is commentary and ignored.
class QplibReader {
 public:
  explicit QplibReader(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::vector<Token> tokens;
      size_t i = 0;
      while (i < raw.size()) {
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
        if (i >= raw.size() || raw[i] == '#') break;
        if (tokens.empty() && raw[i] == '!') break;
        const size_t start = i;
        while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
        tokens.push_back({raw.substr(start, i - start), line, static_cast<int>(start) + 1});
      }
      if (!tokens.empty()) lines_.push_back(std::move(tokens));
    }
    last_line_ = line;
  }

  const std::vector<Token>& record(size_t fields, const char* what) {
    if (next_ >= lines_.size()) {
      throw ParseError(std::string("unexpected end of file, expected ") + what, last_line_ + 1, 1);
    }
    const auto& toks = lines_[next_++];
    if (toks.size() < fields) {
      throw ParseError(std::string("expected ") + std::to_string(fields) + " field(s) for " + what,
                       toks.front().line, toks.back().column + static_cast<int>(toks.back().text.size()));
    }
    return toks;
  }

  static double number(const Token& t, const char* what) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end == t.text.c_str() || *end != '\0') {
      throw ParseError(std::string("expected a number for ") + what + ", got '" + t.text + "'",
                       t.line, t.column);
    }
    return v;
  }

  static long integer(const Token& t, const char* what) {
    char* end = nullptr;
    const long v = std::strtol(t.text.c_str(), &end, 10);
    if (end == t.text.c_str() || *end != '\0') {
      throw ParseError(std::string("expected an integer for ") + what + ", got '" + t.text + "'",
                       t.line, t.column);
    }
    return v;
  }

  double value(const char* what) { return number(record(1, what)[0], what); }
  long count(const char* what) {
    const auto& t = record(1, what)[0];
    const long v = integer(t, what);
    if (v < 0) throw ParseError(std::string("negative count for ") + what, t.line, t.column);
    return v;
  }

 private:
  std::vector<std::vector<Token>> lines_;
  size_t next_ = 0;
  int last_line_ = 0;
};

int checked_index(const Token& t, long limit, const char* what) {
  const long v = QplibReader::integer(t, what);
  if (v < 1 || v > limit) {
    throw SchemaError(std::string(what) + " index " + std::to_string(v) + " out of range at line " +
                      std::to_string(t.line));
  }
  return static_cast<int>(v - 1);
}

// Dense vector with a default and sparse overrides.
Vector read_default_vector(QplibReader& r, int size, const char* what) {
  Vector v = Vector::Constant(size, r.value(what));
  const long k = r.count(what);
  for (long e = 0; e < k; ++e) {
    const auto& t = r.record(2, what);
    v(checked_index(t[0], size, what)) = QplibReader::number(t[1], what);
  }
  return v;
}

InstanceDocument parse_qplib(const std::string& text) {
  QplibReader r(text);
  const std::string name = r.record(1, "problem name")[0].text;
  const Token type = r.record(1, "problem type")[0];
  if (type.text.size() != 3) throw ParseError("problem type must have three letters", type.line, type.column);
  const char obj_kind = static_cast<char>(std::toupper(type.text[0]));
  const char var_kind = static_cast<char>(std::toupper(type.text[1]));
  const char con_kind = static_cast<char>(std::toupper(type.text[2]));
  if (std::string("LDCQ").find(obj_kind) == std::string::npos ||
      std::string("CBMIG").find(var_kind) == std::string::npos ||
      std::string("NBLDCQ").find(con_kind) == std::string::npos) {
    throw ParseError("unknown problem type '" + type.text + "'", type.line, type.column);
  }
  switch (var_kind) {
    case 'B': throw UnsupportedFeature("binary variables");
    case 'M': throw UnsupportedFeature("mixed binary variables");
    case 'I': throw UnsupportedFeature("integer variables");
    case 'G': throw UnsupportedFeature("general integer variables");
    default: break;
  }

  const Token sense_tok = r.record(1, "objective sense")[0];
  std::string sense = sense_tok.text;
  for (char& ch : sense) ch = static_cast<char>(std::tolower(ch));
  double sign = 1.0;
  if (sense == "maximize" || sense == "maximise" || sense == "max") {
    sign = -1.0;
  } else if (sense != "minimize" && sense != "minimise" && sense != "min") {
    throw ParseError("objective sense must be minimize or maximize", sense_tok.line,
                     sense_tok.column);
  }

  const long n_long = r.count("number of variables");
  if (n_long < 1) throw SchemaError("number of variables must be positive");
  const int n = static_cast<int>(n_long);
  const bool has_rows = con_kind != 'N' && con_kind != 'B';
  const int m_rows = has_rows ? static_cast<int>(r.count("number of constraints")) : 0;

  // q(x) = ½xᵀQx + bᵀx + c maps to A = Q/2, B = b/2.
  std::vector<Triplet> a0;
  if (obj_kind != 'L') {
    const long k = r.count("objective quadratic terms");
    for (long e = 0; e < k; ++e) {
      const auto& t = r.record(3, "objective quadratic term");
      const int i = checked_index(t[0], n, "objective row");
      const int j = checked_index(t[1], n, "objective column");
      const double v = sign * 0.5 * QplibReader::number(t[2], "objective coefficient");
      a0.emplace_back(i, j, v);
      if (i != j) a0.emplace_back(j, i, v);
    }
  }
  const Vector b0 = sign * 0.5 * read_default_vector(r, n, "objective linear coefficients");
  const double c0 = sign * r.value("objective constant");

  std::vector<std::vector<Triplet>> a(m_rows), b(m_rows);
  if (con_kind == 'D' || con_kind == 'C' || con_kind == 'Q') {
    const long k = r.count("constraint quadratic terms");
    for (long e = 0; e < k; ++e) {
      const auto& t = r.record(4, "constraint quadratic term");
      const int row = checked_index(t[0], m_rows, "constraint");
      const int i = checked_index(t[1], n, "constraint row");
      const int j = checked_index(t[2], n, "constraint column");
      const double v = 0.5 * QplibReader::number(t[3], "constraint coefficient");
      a[row].emplace_back(i, j, v);
      if (i != j) a[row].emplace_back(j, i, v);
    }
  }
  if (has_rows) {
    const long k = r.count("constraint linear terms");
    for (long e = 0; e < k; ++e) {
      const auto& t = r.record(3, "constraint linear term");
      const int row = checked_index(t[0], m_rows, "constraint");
      const int i = checked_index(t[1], n, "constraint variable");
      b[row].emplace_back(i, 0, 0.5 * QplibReader::number(t[2], "constraint coefficient"));
    }
  }
  const double infinity = std::abs(r.value("infinity"));
  auto clip = [infinity](Vector v) {
    for (int i = 0; i < v.size(); ++i) {
      if (v(i) >= infinity) v(i) = kInf;
      if (v(i) <= -infinity) v(i) = -kInf;
    }
    return v;
  };
  Vector cl, cu;
  if (has_rows) {
    cl = clip(read_default_vector(r, m_rows, "constraint lower sides"));
    cu = clip(read_default_vector(r, m_rows, "constraint upper sides"));
  }
  std::optional<Bounds> bounds;
  if (con_kind != 'N') {
    Bounds bd{clip(read_default_vector(r, n, "variable lower bounds")),
              clip(read_default_vector(r, n, "variable upper bounds"))};
    bool finite = false;
    for (int i = 0; i < n; ++i) {
      finite = finite || std::isfinite(bd.lower(i)) || std::isfinite(bd.upper(i));
    }
    if (finite) bounds = std::move(bd);
  }
  // Starting points and names that may follow are not needed.

  std::vector<Triplet> bt;
  for (int i = 0; i < n; ++i)
    if (b0(i) != 0.0) bt.emplace_back(i, 0, b0(i));
  QuadForm obj = make_form(n, 1, a0, bt, c0);
  std::vector<QuadForm> eqs, ineqs;
  for (int row = 0; row < m_rows; ++row) {
    if (cl(row) > cu(row)) {
      throw SchemaError("constraint " + std::to_string(row + 1) + " has lower side above upper");
    }
    if (cl(row) == cu(row)) {
      eqs.push_back(make_form(n, 1, a[row], b[row], -cl(row)));
      continue;
    }
    if (std::isfinite(cu(row))) ineqs.push_back(make_form(n, 1, a[row], b[row], -cu(row)));
    if (std::isfinite(cl(row))) {
      std::vector<Triplet> na, nb;
      for (const auto& t : a[row]) na.emplace_back(t.row(), t.col(), -t.value());
      for (const auto& t : b[row]) nb.emplace_back(t.row(), t.col(), -t.value());
      ineqs.push_back(make_form(n, 1, na, nb, cl(row)));
    }
  }
  return {name, make_instance(n, 1, std::move(obj), std::move(eqs), std::move(ineqs), bounds),
          std::nullopt, std::nullopt};
}

}  // namespace

Format detect_format(const std::string& path) {
  const std::string ext = ".qplib";
  if (path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return Format::kQplib;
  }
  return Format::kNativeJson;
}

InstanceDocument parse_instance(const std::string& text, Format format) {
  return format == Format::kQplib ? parse_qplib(text) : parse_native(text);
}

InstanceDocument read_instance(const std::string& path, std::optional<Format> format) {
  return parse_instance(read_text_file(path), format.value_or(detect_format(path)));
}

std::string serialize_instance(const InstanceDocument& doc) {
  const QcqpInstance& inst = doc.instance;
  json j;
  j["schema"] = kSchemaName;
  j["version"] = kSchemaVersion;
  j["name"] = doc.name;
  j["n"] = inst.n();
  j["m"] = inst.m();
  j["objective"] = form_to_json(inst.objective());
  j["equalities"] = json::array();
  for (const auto& q : inst.equalities()) j["equalities"].push_back(form_to_json(q));
  j["inequalities"] = json::array();
  for (const auto& q : inst.inequalities()) j["inequalities"].push_back(form_to_json(q));
  if (inst.bounds()) {
    json lo = json::array(), up = json::array();
    for (int i = 0; i < inst.n(); ++i) {
      lo.push_back(number_or_inf(inst.bounds()->lower(i)));
      up.push_back(number_or_inf(inst.bounds()->upper(i)));
    }
    j["bounds"] = {{"lower", lo}, {"upper", up}};
  }
  if (doc.reference_objective || doc.reference_solution) {
    json ref = json::object();
    if (doc.reference_objective) ref["objective"] = *doc.reference_objective;
    if (doc.reference_solution) {
      json rows = json::array();
      for (int i = 0; i < doc.reference_solution->rows(); ++i) {
        json row = json::array();
        for (int c = 0; c < doc.reference_solution->cols(); ++c) {
          row.push_back((*doc.reference_solution)(i, c));
        }
        rows.push_back(row);
      }
      ref["solution"] = rows;
    }
    j["reference"] = ref;
  }
  return j.dump() + "\n";
}

void write_instance(const InstanceDocument& doc, const std::string& path) {
  write_text_file(path, serialize_instance(doc));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": " + std::strerror(errno));
  out << content;
  out.flush();
  if (!out) throw std::runtime_error(path + ": " + std::strerror(errno));
}

}  // namespace parabolic::io
