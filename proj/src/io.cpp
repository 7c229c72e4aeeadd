#include "mgfactor/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mgfactor/cusp.hpp"
#include "mgfactor/errors.hpp"
#include "mgfactor/rng.hpp"

namespace mgf::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_file(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_double(std::string& s, double v) {
  s += format_double(v);
}

// Fast split for machine-written numeric tables (no quoting).
void split_plain(const std::string& line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.emplace_back(line.data() + start, line.size() - start);
      return;
    }
    fields.emplace_back(line.data() + start, comma - start);
    start = comma + 1;
  }
}

template <class T>
T parse_int(std::string_view text, const std::string& where) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError(where + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_double_view(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec == std::errc::result_out_of_range) return parse_double(std::string(text), where);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError(where + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// ---- JSON schema helpers ----

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

void get_int(const json& obj, const char* key, int& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError(where + "." + key + " must be an integer");
  const auto x = v.get<long long>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ValidationError(where + "." + key + " is out of range");
  }
  dst = static_cast<int>(x);
}

void get_seed(const json& obj, const char* key, std::uint64_t& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ValidationError(where + "." + key + " must be a nonnegative integer");
  dst = v.get<std::uint64_t>();
}

void get_double(const json& obj, const char* key, double& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ValidationError(where + "." + key + " must be a number");
  dst = v.get<double>();
}

void get_bool(const json& obj, const char* key, bool& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ValidationError(where + "." + key + " must be true or false");
  dst = v.get<bool>();
}

template <class T>
void get_array(const json& obj, const char* key, std::vector<T>& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_array()) throw ValidationError(where + "." + key + " must be an array");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer()) throw ValidationError(where + "." + key + " must hold integers");
    } else {
      if (!e.is_number()) throw ValidationError(where + "." + key + " must hold numbers");
    }
    out.push_back(e.get<T>());
  }
  dst = std::move(out);
}

CuspHyper cusp_from_json(const json& obj, const std::string& where) {
  check_keys(obj, {"a1", "a2", "v0", "a_alpha", "b_alpha", "iota"}, where);
  CuspHyper h;
  get_double(obj, "a1", h.a1, where);
  get_double(obj, "a2", h.a2, where);
  get_double(obj, "v0", h.v0, where);
  get_double(obj, "a_alpha", h.a_alpha, where);
  get_double(obj, "b_alpha", h.b_alpha, where);
  get_double(obj, "iota", h.iota, where);
  return h;
}

json cusp_to_json(const CuspHyper& h) {
  return json{{"a1", h.a1}, {"a2", h.a2}, {"v0", h.v0}, {"a_alpha", h.a_alpha}, {"b_alpha", h.b_alpha},
              {"iota", h.iota}};
}

json grid_json(const TimeGrid& grid) {
  json pts = json::array();
  for (double t : grid.points) pts.push_back(t);
  return pts;
}

// Long table with a leading group column: "group,row,col,value".
std::string group_table(const std::vector<Eigen::MatrixXd>& mats, int first_group) {
  std::string s = "group,row,col,value\n";
  for (std::size_t g = 0; g < mats.size(); ++g) {
    const auto& m = mats[g];
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        s += std::to_string(first_group + static_cast<int>(g)) + "," + std::to_string(i + 1) + "," +
             std::to_string(j + 1) + ",";
        append_double(s, m(i, j));
        s += '\n';
      }
  }
  return s;
}

// Fills preallocated matrices from a "group,row,col,value" file.
void read_group_table(const fs::path& path, std::vector<Eigen::MatrixXd>& mats, int first_group) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  strip_cr(line);
  if (line != "group,row,col,value") throw ValidationError(path.string() + ": unexpected header");
  std::vector<std::string_view> f;
  const std::string where = path.filename().string();
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    split_plain(line, f);
    if (f.size() != 4) throw ValidationError(where + ": expected 4 fields");
    const int g = parse_int<int>(f[0], where) - first_group;
    const int r = parse_int<int>(f[1], where) - 1;
    const int c = parse_int<int>(f[2], where) - 1;
    if (g < 0 || g >= static_cast<int>(mats.size()) || r < 0 || r >= mats[g].rows() || c < 0 ||
        c >= mats[g].cols()) {
      throw ValidationError(where + ": index out of range");
    }
    mats[g](r, c) = parse_double_view(f[3], where);
  }
}

// time,component,value for a T x q loading matrix.
std::string loading_table(const Eigen::MatrixXd& m, const TimeGrid& grid) {
  std::string s = "time,component,value\n";
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      append_double(s, grid.points[t]);
      s += "," + std::to_string(j + 1) + ",";
      append_double(s, m(t, j));
      s += '\n';
    }
  return s;
}

Eigen::MatrixXd read_loading_table(const fs::path& path, int num_points, int columns) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(num_points, columns);
  std::vector<int> filled(columns, 0);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  strip_cr(line);
  if (line != "time,component,value") throw ValidationError(path.string() + ": unexpected header");
  std::vector<std::string_view> f;
  const std::string where = path.filename().string();
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    split_plain(line, f);
    if (f.size() != 3) throw ValidationError(where + ": expected 3 fields");
    const int c = parse_int<int>(f[1], where) - 1;
    if (c < 0 || c >= columns || filled[c] >= num_points) throw ValidationError(where + ": component out of range");
    m(filled[c]++, c) = parse_double_view(f[2], where);
  }
  for (int c = 0; c < columns; ++c)
    if (filled[c] != num_points) throw ValidationError(where + ": incomplete component " + std::to_string(c + 1));
  return m;
}

std::string config_json_label(const FactorConfiguration& c) { return c.label(); }

json config_to_json(const FactorConfiguration& c) {
  return json{{"shared", c.shared}, {"specific", c.specific}, {"label", c.label()}};
}

FactorConfiguration config_from_json(const json& j) {
  FactorConfiguration c;
  c.shared = j.at("shared").get<int>();
  c.specific = j.at("specific").get<std::vector<int>>();
  return c;
}

// ---- draw families ----

struct DrawWriter {
  std::ofstream out;
  fs::path path;
  std::string buf;
  void open(const fs::path& p) {
    path = p;
    out = open_out(p);
    buf = "iteration,group,row,col,value\n";
  }
  void row(int it, int group, Eigen::Index r, Eigen::Index c, double v) {
    buf += std::to_string(it);
    buf += ',';
    buf += std::to_string(group);
    buf += ',';
    buf += std::to_string(r);
    buf += ',';
    buf += std::to_string(c);
    buf += ',';
    append_double(buf, v);
    buf += '\n';
    if (buf.size() > (1u << 20)) flush();
  }
  void row_int(int it, int group, Eigen::Index r, int v) {
    buf += std::to_string(it) + ',' + std::to_string(group) + ',' + std::to_string(r) + ",0," + std::to_string(v) +
           '\n';
  }
  void matrix(int it, int group, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) row(it, group, i, j, m(i, j));
  }
  void flush() {
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.clear();
  }
  void close() {
    flush();
    finish(out, path);
    out.close();
  }
};

// Streams one family file and hands (draw index, group, row, col, value) to fn.
template <class Fn>
void scan_family(const fs::path& path, const std::unordered_map<int, int>& index_of, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  strip_cr(line);
  if (line != "iteration,group,row,col,value") throw ValidationError(path.string() + ": unexpected header");
  std::vector<std::string_view> f;
  const std::string where = path.filename().string();
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    split_plain(line, f);
    if (f.size() != 5) throw ValidationError(where + ": expected 5 fields");
    const int it = parse_int<int>(f[0], where);
    const auto found = index_of.find(it);
    if (found == index_of.end()) throw ValidationError(where + ": iteration " + std::to_string(it) + " not in model.json");
    fn(found->second, parse_int<int>(f[1], where), parse_int<int>(f[2], where), parse_int<int>(f[3], where),
       parse_double_view(f[4], where));
  }
}

void check_cell(bool ok, const std::string& family) {
  if (!ok) throw ValidationError(family + ": index out of range");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(const std::string& text, const std::string& where) {
  if (text == "nan" || text == "NaN" || text == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ValidationError(where + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      field.clear();
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ValidationError(path.string() + ": unterminated quote");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- datasets ----

void write_grid(const fs::path& path, const TimeGrid& grid) {
  std::string s = "index,time\n";
  for (int t = 0; t < grid.size(); ++t) {
    s += std::to_string(t + 1) + ",";
    append_double(s, grid.points[t]);
    s += '\n';
  }
  write_file(path, s);
}

TimeGrid read_grid(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "index" || rows[0][1] != "time") {
    throw ValidationError(path.string() + ": grid header must be 'index,time'");
  }
  TimeGrid grid;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = path.filename().string() + " line " + std::to_string(i + 1);
    if (rows[i].size() != 2) throw ValidationError(where + ": expected 2 fields");
    if (parse_int<int>(rows[i][0], where) != static_cast<int>(i)) {
      throw ValidationError(where + ": indices must run 1..T in order");
    }
    grid.points.push_back(parse_double(rows[i][1], where));
  }
  try {
    grid.validate();
  } catch (const Error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return grid;
}

void write_dataset(const fs::path& path, const FunctionalDataset& data) {
  const int T = data.num_points();
  auto out = open_out(path);
  std::string s = "subject_id,group_id";
  for (int t = 0; t < T; ++t) s += ",t_" + std::to_string(t + 1);
  s += '\n';
  for (const auto& g : data.groups) {
    if (g.y.cols() != T) throw InvalidDimension("dataset group width does not match the grid");
    for (Eigen::Index i = 0; i < g.y.rows(); ++i) {
      const std::string sid =
          i < static_cast<Eigen::Index>(g.subject_ids.size()) ? g.subject_ids[i] : g.id + "_" + std::to_string(i + 1);
      s += csv_quote(sid) + "," + csv_quote(g.id);
      for (int t = 0; t < T; ++t) {
        s += ',';
        append_double(s, g.y(i, t));
      }
      s += '\n';
    }
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    s.clear();
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  finish(out, path);
}

FunctionalDataset read_dataset(const fs::path& data_path, const fs::path& grid_path) {
  FunctionalDataset data;
  data.grid = read_grid(grid_path);
  const int T = data.grid.size();
  const auto rows = read_csv(data_path);
  if (rows.empty()) throw ValidationError(data_path.string() + ": empty file");
  const auto& header = rows[0];
  if (header.size() != static_cast<std::size_t>(T) + 2 || header[0] != "subject_id" || header[1] != "group_id") {
    throw ValidationError(data_path.string() + ": header must be subject_id,group_id,t_1..t_" + std::to_string(T) +
                          " to match the grid");
  }
  for (int t = 0; t < T; ++t) {
    if (header[t + 2] != "t_" + std::to_string(t + 1)) {
      throw ValidationError(data_path.string() + ": column " + std::to_string(t + 3) + " must be t_" +
                            std::to_string(t + 1));
    }
  }
  std::vector<std::vector<std::vector<double>>> values;
  std::unordered_map<std::string, int> group_index;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = data_path.filename().string() + " line " + std::to_string(i + 1);
    if (rows[i].size() != header.size()) throw ValidationError(where + ": wrong number of fields");
    const std::string& gid = rows[i][1];
    auto [it, inserted] = group_index.emplace(gid, static_cast<int>(data.groups.size()));
    if (inserted) {
      GroupData g;
      g.id = gid;
      data.groups.push_back(std::move(g));
      values.emplace_back();
    }
    auto& g = data.groups[it->second];
    g.subject_ids.push_back(rows[i][0]);
    std::vector<double> y(T);
    for (int t = 0; t < T; ++t) y[t] = parse_double(rows[i][t + 2], where);
    values[it->second].push_back(std::move(y));
  }
  for (std::size_t s = 0; s < data.groups.size(); ++s) {
    auto& g = data.groups[s];
    g.y.resize(static_cast<Eigen::Index>(values[s].size()), T);
    for (std::size_t i = 0; i < values[s].size(); ++i)
      for (int t = 0; t < T; ++t) g.y(static_cast<Eigen::Index>(i), t) = values[s][i][t];
  }
  data.validate();
  return data;
}

// ---- configuration ----

ScenarioConfig scenario_from_json(const json& doc) {
  const std::string where = "scenario";
  check_keys(doc, {"preset", "name", "shared_factors", "specific_factors", "sample_sizes", "num_points", "num_basis",
                   "sigma2_beta", "snr", "replicates", "seed"},
             where);
  ScenarioConfig c;
  if (doc.contains("preset")) {
    if (!doc.at("preset").is_string()) throw ValidationError("scenario.preset must be a string");
    c = ScenarioConfig::preset(doc.at("preset").get<std::string>());
  }
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ValidationError("scenario.name must be a string");
    c.name = doc.at("name").get<std::string>();
  }
  get_int(doc, "shared_factors", c.shared_factors, where);
  get_array(doc, "specific_factors", c.specific_factors, where);
  get_array(doc, "sample_sizes", c.sample_sizes, where);
  if (doc.contains("sample_sizes") && !doc.contains("sigma2_beta")) {
    c.sigma2_beta = ScenarioConfig::default_sigma2_beta(c.num_groups());
  }
  get_int(doc, "num_points", c.num_points, where);
  get_int(doc, "num_basis", c.num_basis, where);
  get_array(doc, "sigma2_beta", c.sigma2_beta, where);
  get_double(doc, "snr", c.snr, where);
  get_int(doc, "replicates", c.replicates, where);
  get_seed(doc, "seed", c.seed, where);
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  return json{{"name", c.name},
              {"shared_factors", c.shared_factors},
              {"specific_factors", c.specific_factors},
              {"sample_sizes", c.sample_sizes},
              {"num_points", c.num_points},
              {"num_basis", c.num_basis},
              {"sigma2_beta", c.sigma2_beta},
              {"snr", c.snr},
              {"replicates", c.replicates},
              {"seed", c.seed}};
}

SamplerConfig sampler_from_json(const json& doc) {
  const std::string where = "sampler";
  check_keys(doc, {"iterations", "burn_in", "thin", "max_shared", "max_specific", "num_basis", "ridge", "shared_prior",
                   "specific_prior", "variance_priors", "rescale", "init", "seed"},
             where);
  SamplerConfig c;
  get_int(doc, "iterations", c.iterations, where);
  get_int(doc, "burn_in", c.burn_in, where);
  get_int(doc, "thin", c.thin, where);
  get_int(doc, "max_shared", c.max_shared, where);
  get_int(doc, "max_specific", c.max_specific, where);
  get_int(doc, "num_basis", c.num_basis, where);
  get_double(doc, "ridge", c.ridge, where);
  if (doc.contains("shared_prior")) c.shared_hyper = cusp_from_json(doc.at("shared_prior"), "sampler.shared_prior");
  if (doc.contains("specific_prior")) {
    c.specific_hyper = cusp_from_json(doc.at("specific_prior"), "sampler.specific_prior");
  }
  if (doc.contains("variance_priors")) {
    const auto& v = doc.at("variance_priors");
    const std::string w = "sampler.variance_priors";
    check_keys(v, {"a_beta", "b_beta", "eps_shape", "eps_rate"}, w);
    get_double(v, "a_beta", c.priors.a_beta, w);
    get_double(v, "b_beta", c.priors.b_beta, w);
    get_double(v, "eps_shape", c.priors.eps_shape, w);
    get_double(v, "eps_rate", c.priors.eps_rate, w);
  }
  get_bool(doc, "rescale", c.rescale, where);
  if (doc.contains("init")) {
    const auto& v = doc.at("init");
    if (v == "spectral") {
      c.init = InitStrategy::kSpectral;
    } else if (v == "prior") {
      c.init = InitStrategy::kPrior;
    } else {
      throw ValidationError("sampler.init must be \"spectral\" or \"prior\"");
    }
  }
  get_seed(doc, "seed", c.seed, where);
  c.validate();
  return c;
}

json sampler_to_json(const SamplerConfig& c) {
  return json{{"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"max_shared", c.max_shared},
              {"max_specific", c.max_specific},
              {"num_basis", c.num_basis},
              {"ridge", c.ridge},
              {"shared_prior", cusp_to_json(c.shared_hyper)},
              {"specific_prior", cusp_to_json(c.specific_hyper)},
              {"variance_priors",
               {{"a_beta", c.priors.a_beta},
                {"b_beta", c.priors.b_beta},
                {"eps_shape", c.priors.eps_shape},
                {"eps_rate", c.priors.eps_rate}}},
              {"rescale", c.rescale},
              {"init", c.init == InitStrategy::kSpectral ? "spectral" : "prior"},
              {"seed", c.seed}};
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, {"scenario", "sampler", "postprocess"}, "config");
  RunConfig rc;
  rc.raw = doc;
  if (doc.contains("scenario")) {
    rc.scenario = scenario_from_json(doc.at("scenario"));
    rc.has_scenario = true;
  }
  if (doc.contains("sampler")) {
    rc.sampler = sampler_from_json(doc.at("sampler"));
    rc.has_sampler = true;
  }
  if (doc.contains("postprocess")) {
    const auto& p = doc.at("postprocess");
    check_keys(p, {"histogram_limit"}, "postprocess");
    get_int(p, "histogram_limit", rc.histogram_limit, "postprocess");
    if (rc.histogram_limit < 1) throw ValidationError("postprocess.histogram_limit must be >= 1");
  }
  return rc;
}

RunConfig read_config(const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(doc);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- manifest ----

json RunManifest::to_json() const {
  return json{{"command", command}, {"config_digest", config_digest}, {"seed", seed},     {"started", started},
              {"finished", finished}, {"inputs", inputs},             {"outputs", outputs}, {"version", version}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_manifest(const fs::path& dir, const RunManifest& manifest) {
  write_text_atomic(dir / ("manifest_" + manifest.command + ".json"), manifest.to_json().dump(2) + "\n");
}

// ---- draws ----

std::vector<std::string> write_posterior(const fs::path& dir, const PosteriorDraws& posterior) {
  const int S = static_cast<int>(posterior.group_ids.size());
  json model;
  model["grid"] = grid_json(posterior.grid);
  model["num_basis"] = posterior.num_basis;
  model["ridge"] = posterior.ridge;
  model["group_ids"] = posterior.group_ids;
  json iterations = json::array();
  for (const auto& d : posterior.draws) iterations.push_back(d.iteration);
  model["iterations"] = iterations;
  if (!posterior.draws.empty()) {
    const auto& d0 = posterior.draws.front();
    model["max_shared"] = d0.shared_loadings.cols();
    model["max_specific"] = S > 0 ? d0.specific_loadings[0].cols() : 0;
    json sizes = json::array();
    for (int s = 0; s < S; ++s) sizes.push_back(d0.eta[s].rows());
    model["sample_sizes"] = sizes;
  } else {
    model["max_shared"] = 0;
    model["max_specific"] = 0;
    model["sample_sizes"] = json::array();
  }
  write_file(dir / "model.json", model.dump(2) + "\n");

  const std::vector<std::string> names = {"beta",        "sigma2_eps", "sigma2_beta", "shared_loadings",
                                          "specific_loadings", "eta", "rho", "z_shared", "z_specific"};
  std::vector<DrawWriter> w(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) w[k].open(dir / (names[k] + ".csv"));
  for (const auto& d : posterior.draws) {
    const int it = d.iteration;
    for (int s = 0; s < S; ++s) {
      for (Eigen::Index r = 0; r < d.beta[s].size(); ++r) w[0].row(it, s + 1, r, 0, d.beta[s](r));
      w[1].row(it, s + 1, 0, 0, d.sigma2_eps(s));
      w[2].row(it, s + 1, 0, 0, d.sigma2_beta(s));
    }
    w[3].matrix(it, 0, d.shared_loadings);
    for (int s = 0; s < S; ++s) w[4].matrix(it, s + 1, d.specific_loadings[s]);
    for (int s = 0; s < S; ++s) w[5].matrix(it, s + 1, d.eta[s]);
    for (int s = 0; s < S; ++s) w[6].matrix(it, s + 1, d.rho[s]);
    for (std::size_t l = 0; l < d.z_shared.size(); ++l) w[7].row_int(it, 0, static_cast<Eigen::Index>(l), d.z_shared[l]);
    for (int s = 0; s < S; ++s)
      for (std::size_t l = 0; l < d.z_specific[s].size(); ++l)
        w[8].row_int(it, s + 1, static_cast<Eigen::Index>(l), d.z_specific[s][l]);
  }
  std::vector<std::string> files = {"model.json"};
  for (std::size_t k = 0; k < names.size(); ++k) {
    w[k].close();
    files.push_back(names[k] + ".csv");
  }
  return files;
}

PosteriorDraws read_posterior(const fs::path& dir) {
  const fs::path model_path = dir / "model.json";
  if (!fs::exists(model_path)) throw IoError("no model.json in " + dir.string());
  json model;
  try {
    model = json::parse(read_file(model_path));
  } catch (const json::exception& e) {
    throw ValidationError(model_path.string() + ": invalid JSON: " + e.what());
  }
  PosteriorDraws post;
  int L = 0, K = 0;
  std::vector<int> sizes;
  std::vector<int> iterations;
  try {
    post.grid.points = model.at("grid").get<std::vector<double>>();
    post.num_basis = model.at("num_basis").get<int>();
    post.ridge = model.at("ridge").get<double>();
    post.group_ids = model.at("group_ids").get<std::vector<std::string>>();
    iterations = model.at("iterations").get<std::vector<int>>();
    L = model.at("max_shared").get<int>();
    K = model.at("max_specific").get<int>();
    sizes = model.at("sample_sizes").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ValidationError(model_path.string() + ": " + e.what());
  }
  const int S = static_cast<int>(post.group_ids.size());
  const int R = post.num_basis;
  const std::size_t M = iterations.size();
  if (M > 0 && static_cast<int>(sizes.size()) != S) throw ValidationError("model.json: sample_sizes length mismatch");

  std::unordered_map<int, int> index_of;
  post.draws.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    index_of[iterations[m]] = static_cast<int>(m);
    auto& d = post.draws[m];
    d.iteration = iterations[m];
    d.beta.assign(S, Eigen::VectorXd::Zero(R));
    d.sigma2_eps = Eigen::VectorXd::Zero(S);
    d.sigma2_beta = Eigen::VectorXd::Zero(S);
    d.shared_loadings = Eigen::MatrixXd::Zero(R, L);
    d.specific_loadings.assign(S, Eigen::MatrixXd::Zero(R, K));
    for (int s = 0; s < S; ++s) {
      d.eta.push_back(Eigen::MatrixXd::Zero(sizes[s], L));
      d.rho.push_back(Eigen::MatrixXd::Zero(sizes[s], K));
    }
    d.z_shared.assign(L, 0);
    d.z_specific.assign(S, std::vector<int>(K, 0));
  }
  if (M == 0) return post;

  auto group_ok = [S](int g) { return g >= 1 && g <= S; };
  scan_family(dir / "beta.csv", index_of, [&](int m, int g, int r, int, double v) {
    check_cell(group_ok(g) && r >= 0 && r < R, "beta");
    post.draws[m].beta[g - 1](r) = v;
  });
  scan_family(dir / "sigma2_eps.csv", index_of, [&](int m, int g, int, int, double v) {
    check_cell(group_ok(g), "sigma2_eps");
    post.draws[m].sigma2_eps(g - 1) = v;
  });
  scan_family(dir / "sigma2_beta.csv", index_of, [&](int m, int g, int, int, double v) {
    check_cell(group_ok(g), "sigma2_beta");
    post.draws[m].sigma2_beta(g - 1) = v;
  });
  scan_family(dir / "shared_loadings.csv", index_of, [&](int m, int, int r, int c, double v) {
    check_cell(r >= 0 && r < R && c >= 0 && c < L, "shared_loadings");
    post.draws[m].shared_loadings(r, c) = v;
  });
  scan_family(dir / "specific_loadings.csv", index_of, [&](int m, int g, int r, int c, double v) {
    check_cell(group_ok(g) && r >= 0 && r < R && c >= 0 && c < K, "specific_loadings");
    post.draws[m].specific_loadings[g - 1](r, c) = v;
  });
  scan_family(dir / "eta.csv", index_of, [&](int m, int g, int r, int c, double v) {
    check_cell(group_ok(g) && r >= 0 && r < sizes[g - 1] && c >= 0 && c < L, "eta");
    post.draws[m].eta[g - 1](r, c) = v;
  });
  scan_family(dir / "rho.csv", index_of, [&](int m, int g, int r, int c, double v) {
    check_cell(group_ok(g) && r >= 0 && r < sizes[g - 1] && c >= 0 && c < K, "rho");
    post.draws[m].rho[g - 1](r, c) = v;
  });
  scan_family(dir / "z_shared.csv", index_of, [&](int m, int, int r, int, double v) {
    check_cell(r >= 0 && r < L, "z_shared");
    post.draws[m].z_shared[r] = static_cast<int>(v);
  });
  scan_family(dir / "z_specific.csv", index_of, [&](int m, int g, int r, int, double v) {
    check_cell(group_ok(g) && r >= 0 && r < K, "z_specific");
    post.draws[m].z_specific[g - 1][r] = static_cast<int>(v);
  });
  for (const auto& d : post.draws) {
    FactorConfiguration c;
    c.shared = count_active(d.z_shared);
    for (const auto& z : d.z_specific) c.specific.push_back(count_active(z));
    post.configs.push_back(c);
  }
  return post;
}

// ---- truth ----

std::vector<std::string> write_truth(const fs::path& dir, const ScenarioTruth& truth) {
  const int S = truth.num_groups();
  std::vector<std::string> files;
  json meta;
  meta["scenario"] = scenario_to_json(truth.config);
  std::vector<std::string> ids;
  for (int s = 0; s < S; ++s) ids.push_back(std::to_string(s + 1));
  meta["group_ids"] = ids;
  FactorConfiguration c;
  c.shared = static_cast<int>(truth.shared_loadings.cols());
  for (const auto& m : truth.specific_loadings) c.specific.push_back(static_cast<int>(m.cols()));
  meta["configuration"] = config_to_json(c);
  write_file(dir / "truth.json", meta.dump(2) + "\n");
  files.push_back("truth.json");

  write_file(dir / "truth_shared_loadings.csv", matrix_table(truth.basis * truth.shared_loadings));
  std::vector<Eigen::MatrixXd> spec;
  for (const auto& m : truth.specific_loadings) spec.push_back(truth.basis * m);
  write_file(dir / "truth_specific_loadings.csv", group_table(spec, 1));
  write_file(dir / "truth_sigma_f.csv", group_table(truth.sigma_f, 1));
  std::vector<Eigen::MatrixXd> betas;
  for (const auto& b : truth.beta) betas.push_back(b);
  write_file(dir / "truth_beta.csv", group_table(betas, 1));
  std::vector<Eigen::MatrixXd> noise;
  for (int s = 0; s < S; ++s) noise.push_back(Eigen::MatrixXd::Constant(1, 1, truth.sigma2_eps(s)));
  write_file(dir / "truth_sigma2_eps.csv", group_table(noise, 1));

  FunctionalDataset f;
  f.grid = truth.grid;
  for (int s = 0; s < S; ++s) {
    GroupData g;
    g.id = ids[s];
    for (Eigen::Index i = 0; i < truth.f[s].rows(); ++i) g.subject_ids.push_back("g" + g.id + "_s" + std::to_string(i + 1));
    g.y = truth.f[s];
    f.groups.push_back(std::move(g));
  }
  write_dataset(dir / "truth_f.csv", f);
  write_grid(dir / "truth_grid.csv", truth.grid);
  for (const char* n : {"truth_shared_loadings.csv", "truth_specific_loadings.csv", "truth_sigma_f.csv", "truth_beta.csv",
                        "truth_sigma2_eps.csv", "truth_f.csv", "truth_grid.csv"}) {
    files.push_back(n);
  }
  return files;
}

TruthTables read_truth(const fs::path& dir) {
  TruthTables t;
  json meta;
  try {
    meta = json::parse(read_file(dir / "truth.json"));
    t.scenario = meta.at("scenario").at("name").get<std::string>();
    t.replicates = meta.at("scenario").at("replicates").get<int>();
    t.group_ids = meta.at("group_ids").get<std::vector<std::string>>();
    t.config = config_from_json(meta.at("configuration"));
  } catch (const json::exception& e) {
    throw ValidationError((dir / "truth.json").string() + ": " + e.what());
  }
  const TimeGrid grid = read_grid(dir / "truth_grid.csv");
  const int T = grid.size();
  const int S = static_cast<int>(t.group_ids.size());
  if (static_cast<int>(t.config.specific.size()) != S) throw ValidationError("truth.json: configuration/group mismatch");
  std::vector<Eigen::MatrixXd> shared{Eigen::MatrixXd::Zero(T, t.config.shared)};
  {
    const auto m = read_matrix_table(dir / "truth_shared_loadings.csv");
    if (t.config.shared > 0 && (m.rows() != T || m.cols() != t.config.shared)) {
      throw ValidationError("truth_shared_loadings.csv: dimensions do not match truth.json");
    }
    if (t.config.shared > 0) shared[0] = m;
  }
  t.shared_loadings = shared[0];
  for (int s = 0; s < S; ++s) t.specific_loadings.push_back(Eigen::MatrixXd::Zero(T, t.config.specific[s]));
  read_group_table(dir / "truth_specific_loadings.csv", t.specific_loadings, 1);
  const FunctionalDataset f = read_dataset(dir / "truth_f.csv", dir / "truth_grid.csv");
  if (f.num_groups() != S) throw ValidationError("truth_f.csv: group count does not match truth.json");
  for (const auto& g : f.groups) t.f.push_back(g.y);
  return t;
}

// ---- tables ----

std::string matrix_table(const Eigen::MatrixXd& m) {
  std::string s = "row,col,value\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      s += std::to_string(i + 1) + "," + std::to_string(j + 1) + ",";
      append_double(s, m(i, j));
      s += '\n';
    }
  return s;
}

Eigen::MatrixXd read_matrix_table(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"row", "col", "value"}) {
    throw ValidationError(path.string() + ": header must be 'row,col,value'");
  }
  int nr = 0, nc = 0;
  std::vector<std::tuple<int, int, double>> cells;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = path.filename().string() + " line " + std::to_string(i + 1);
    if (rows[i].size() != 3) throw ValidationError(where + ": expected 3 fields");
    const int r = parse_int<int>(rows[i][0], where);
    const int c = parse_int<int>(rows[i][1], where);
    if (r < 1 || c < 1) throw ValidationError(where + ": indices are 1-based");
    nr = std::max(nr, r);
    nc = std::max(nc, c);
    cells.emplace_back(r - 1, c - 1, parse_double(rows[i][2], where));
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nr, nc);
  for (const auto& [r, c, v] : cells) m(r, c) = v;
  return m;
}

std::vector<std::string> write_summary(const fs::path& dir, const PosteriorDraws& posterior,
                                       const PosteriorSummary& summary, int histogram_limit) {
  const int S = static_cast<int>(posterior.group_ids.size());
  const auto& grid = posterior.grid;
  std::vector<std::string> files;

  json meta;
  meta["modal_configuration"] = config_to_json(summary.modal.config);
  meta["modal_draws"] = summary.modal.members.size();
  meta["retained_draws"] = posterior.size();
  meta["group_ids"] = posterior.group_ids;
  meta["num_points"] = grid.size();
  json eig;
  eig["shared"] = std::vector<double>(summary.loadings.shared_eigenvalues.data(),
                                      summary.loadings.shared_eigenvalues.data() + summary.loadings.shared_eigenvalues.size());
  json spec = json::array();
  for (const auto& e : summary.loadings.specific_eigenvalues) spec.push_back(std::vector<double>(e.data(), e.data() + e.size()));
  eig["specific"] = spec;
  meta["eigenvalues"] = eig;
  meta["warnings"] = summary.loadings.warnings;
  json mean_counts;
  {
    double l = 0.0;
    std::vector<double> k(S, 0.0);
    for (const auto& c : posterior.configs) {
      l += c.shared;
      for (int s = 0; s < S; ++s) k[s] += c.specific[s];
    }
    const double n = std::max<double>(1.0, static_cast<double>(posterior.configs.size()));
    mean_counts["shared"] = l / n;
    for (auto& x : k) x /= n;
    mean_counts["specific"] = k;
  }
  meta["posterior_mean_counts"] = mean_counts;
  write_file(dir / "summary.json", meta.dump(2) + "\n");
  files.push_back("summary.json");

  {
    std::string s = "config,shared";
    for (int g = 0; g < S; ++g) s += ",specific_" + std::to_string(g + 1);
    s += ",count\n";
    for (const auto& [c, n] : configuration_histogram(posterior.configs, histogram_limit)) {
      s += csv_quote(config_json_label(c)) + "," + std::to_string(c.shared);
      for (int k : c.specific) s += "," + std::to_string(k);
      s += "," + std::to_string(n) + "\n";
    }
    write_file(dir / "config_histogram.csv", s);
    files.push_back("config_histogram.csv");
  }

  write_file(dir / "loadings_shared.csv", loading_table(summary.loadings.shared, grid));
  files.push_back("loadings_shared.csv");
  write_file(dir / "covariance_shared.csv", matrix_table(summary.loadings.covariances.shared));
  files.push_back("covariance_shared.csv");
  for (int g = 0; g < S; ++g) {
    const std::string id = posterior.group_ids[g];
    const std::string a = "loadings_specific_" + id + ".csv";
    const std::string b = "covariance_specific_" + id + ".csv";
    const std::string c = "covariance_latent_" + id + ".csv";
    const std::string d = "curves_" + id + ".csv";
    write_file(dir / a, loading_table(summary.loadings.specific[g], grid));
    write_file(dir / b, matrix_table(summary.loadings.covariances.specific[g]));
    write_file(dir / c, matrix_table(summary.loadings.covariances.latent[g]));

    std::string s = "subject,time,mean,lower,upper\n";
    const auto& mean = summary.curves.mean[g];
    for (Eigen::Index i = 0; i < mean.rows(); ++i)
      for (int t = 0; t < grid.size(); ++t) {
        s += std::to_string(i + 1) + ",";
        append_double(s, grid.points[t]);
        s += ",";
        append_double(s, mean(i, t));
        s += ",";
        append_double(s, summary.curves.lower[g](i, t));
        s += ",";
        append_double(s, summary.curves.upper[g](i, t));
        s += '\n';
      }
    write_file(dir / d, s);
    for (const auto& n : {a, b, c, d}) files.push_back(n);
  }
  return files;
}

EstimateTables read_estimates(const fs::path& dir, const std::vector<std::string>& group_ids, int num_points) {
  EstimateTables e;
  json meta;
  try {
    meta = json::parse(read_file(dir / "summary.json"));
    e.config = config_from_json(meta.at("modal_configuration"));
    if (meta.at("group_ids").get<std::vector<std::string>>() != group_ids) {
      throw ValidationError((dir / "summary.json").string() + ": group ids differ from the truth");
    }
  } catch (const json::exception& ex) {
    throw ValidationError((dir / "summary.json").string() + ": " + ex.what());
  }
  const int S = static_cast<int>(group_ids.size());
  e.shared_loadings = read_loading_table(dir / "loadings_shared.csv", num_points, e.config.shared);
  for (int g = 0; g < S; ++g) {
    const std::string id = group_ids[g];
    // Fewer columns than K* are possible when residual eigenvalues were clipped.
    const auto n = meta.at("eigenvalues").at("specific").at(g).size();
    e.specific_loadings.push_back(read_loading_table(dir / ("loadings_specific_" + id + ".csv"), num_points, static_cast<int>(n)));

    std::ifstream in(dir / ("curves_" + id + ".csv"), std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / ("curves_" + id + ".csv")).string());
    std::string line;
    std::getline(in, line);
    std::vector<std::string_view> f;
    std::vector<double> vals;
    int subjects = 0;
    while (std::getline(in, line)) {
      strip_cr(line);
      if (line.empty()) continue;
      split_plain(line, f);
      if (f.size() != 5) throw ValidationError("curves_" + id + ".csv: expected 5 fields");
      subjects = std::max(subjects, parse_int<int>(f[0], "curves"));
      vals.push_back(parse_double_view(f[2], "curves"));
    }
    if (static_cast<int>(vals.size()) != subjects * num_points) throw ValidationError("curves_" + id + ".csv: incomplete");
    Eigen::MatrixXd m(subjects, num_points);
    for (int i = 0; i < subjects; ++i)
      for (int t = 0; t < num_points; ++t) m(i, t) = vals[static_cast<std::size_t>(i) * num_points + t];
    e.curve_mean.push_back(m);
  }
  return e;
}

std::string geweke_table(const PosteriorDraws& posterior, std::uint64_t seed) {
  const int S = static_cast<int>(posterior.group_ids.size());
  const std::size_t M = posterior.draws.size();
  std::string s = "parameter,group,index,z,mean_first,mean_last\n";
  auto emit = [&](const std::string& name, int g, int index, const std::vector<double>& chain) {
    s += name + "," + csv_quote(posterior.group_ids[g]) + "," + std::to_string(index) + ",";
    try {
      const auto r = geweke_diagnostic(chain);
      s += format_double(r.z) + "," + format_double(r.mean_first) + "," + format_double(r.mean_last) + "\n";
    } catch (const Error&) {
      s += "nan,nan,nan\n";
    }
  };
  Rng rng(seed, {5});
  std::vector<double> chain(M);
  for (int g = 0; g < S; ++g) {
    for (std::size_t m = 0; m < M; ++m) chain[m] = posterior.draws[m].sigma2_eps(g);
    emit("sigma2_eps", g, 0, chain);
    for (std::size_t m = 0; m < M; ++m) chain[m] = posterior.draws[m].sigma2_beta(g);
    emit("sigma2_beta", g, 0, chain);
    // Three distinct coefficient indices by a partial Fisher-Yates shuffle.
    std::vector<int> idx(posterior.num_basis);
    for (int r = 0; r < posterior.num_basis; ++r) idx[r] = r;
    const int picks = std::min(3, posterior.num_basis);
    for (int k = 0; k < picks; ++k) {
      const int j = k + static_cast<int>(rng.uniform() * (posterior.num_basis - k));
      std::swap(idx[k], idx[std::min(j, posterior.num_basis - 1)]);
      for (std::size_t m = 0; m < M; ++m) chain[m] = posterior.draws[m].beta[g](idx[k]);
      emit("beta", g, idx[k] + 1, chain);
    }
  }
  return s;
}

}  // namespace mgf::io
