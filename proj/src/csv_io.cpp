#include "survmoe/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace survmoe::data {
namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out(1, '"');
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?";
}

double parse_double(const std::string& s, int line_no, const std::string& col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size())
    throw std::runtime_error("row " + std::to_string(line_no) + ": cannot parse '" +
                             s + "' as a number in column " + col);
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // file line number per data row
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      t.header = split_line(line);
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw std::runtime_error("row " + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (t.header.empty()) throw std::runtime_error(path + " is empty");
  return t;
}

int column_of(const Table& t, const std::string& name, const std::string& path) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end())
    throw std::runtime_error(path + ": missing column '" + name + "'");
  return static_cast<int>(it - t.header.begin());
}

Dataset build_records(const Table& t, const FeatureSchema& schema,
                      const std::string& path, bool allow_unknown,
                      int* unknown_warnings) {
  const int time_col = column_of(t, schema.time_col, path);
  const int event_col = column_of(t, schema.event_col, path);
  std::vector<int> cont_cols, cat_cols;
  for (const auto& n : schema.continuous_names) cont_cols.push_back(column_of(t, n, path));
  for (const auto& n : schema.categorical_names) cat_cols.push_back(column_of(t, n, path));

  Dataset ds;
  ds.records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const int line_no = t.lines[r];
    SurvivalRecord rec;
    rec.time = parse_double(row[time_col], line_no, schema.time_col);
    if (!(rec.time > 0.0))
      throw std::runtime_error("row " + std::to_string(line_no) + ": time must be positive");
    const double ev = parse_double(row[event_col], line_no, schema.event_col);
    if (ev != 0.0 && ev != 1.0)
      throw std::runtime_error("row " + std::to_string(line_no) + ": event value must be 0 or 1");
    rec.event = static_cast<int>(ev);

    rec.continuous = Vec(static_cast<Eigen::Index>(cont_cols.size()));
    for (std::size_t c = 0; c < cont_cols.size(); ++c) {
      const std::string& cell = row[cont_cols[c]];
      rec.continuous[static_cast<Eigen::Index>(c)] =
          is_missing(cell) ? std::numeric_limits<double>::quiet_NaN()
                           : parse_double(cell, line_no, schema.continuous_names[c]);
    }
    rec.categorical.resize(cat_cols.size());
    for (std::size_t c = 0; c < cat_cols.size(); ++c) {
      const std::string& cell = row[cat_cols[c]];
      int level;
      if (is_missing(cell)) {
        level = schema.missing_level(static_cast<int>(c));
      } else {
        level = schema.level_index(static_cast<int>(c), cell);
        if (level < 0) {
          if (!allow_unknown)
            throw std::logic_error("vocabulary missed level '" + cell + "' during fit");
          level = schema.missing_level(static_cast<int>(c));
          if (unknown_warnings) ++*unknown_warnings;
        }
      }
      rec.categorical[c] = level;
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace

SchemaDecl read_schema_decl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const json j = json::parse(in);
  SchemaDecl d;
  d.time_col = j.at("time").get<std::string>();
  d.event_col = j.at("event").get<std::string>();
  d.continuous = j.value("continuous", std::vector<std::string>{});
  d.categorical = j.value("categorical", std::vector<std::string>{});
  return d;
}

void write_schema_decl(const std::string& path, const SchemaDecl& decl) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const json j{{"time", decl.time_col},
               {"event", decl.event_col},
               {"continuous", decl.continuous},
               {"categorical", decl.categorical}};
  out << j.dump(2) << '\n';
}

Dataset load_csv_fit(const std::string& path, const SchemaDecl& decl,
                     FeatureSchema& schema_out) {
  const Table t = read_table(path);
  FeatureSchema schema;
  schema.time_col = decl.time_col;
  schema.event_col = decl.event_col;
  schema.continuous_names = decl.continuous;
  schema.categorical_names = decl.categorical;
  for (const auto& name : decl.categorical) {
    const int col = column_of(t, name, path);
    std::set<std::string> levels;
    for (const auto& row : t.rows)
      if (!is_missing(row[col])) levels.insert(row[col]);
    std::vector<std::string> vocab(levels.begin(), levels.end());
    if (std::find(vocab.begin(), vocab.end(), "missing") == vocab.end())
      vocab.push_back("missing");
    schema.vocabularies.push_back(std::move(vocab));
  }
  Dataset ds = build_records(t, schema, path, false, nullptr);
  schema_out = std::move(schema);
  return ds;
}

Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 int* unknown_warnings) {
  const Table t = read_table(path);
  return build_records(t, schema, path, true, unknown_warnings);
}

void write_csv(const std::string& path, const Dataset& ds, const FeatureSchema& schema) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::string header;
  for (const auto& n : schema.continuous_names) header += csv_quote(n) + ",";
  for (const auto& n : schema.categorical_names) header += csv_quote(n) + ",";
  header += csv_quote(schema.time_col) + "," + csv_quote(schema.event_col);
  out << header << '\n';
  for (const auto& r : ds.records) {
    std::string line;
    for (Eigen::Index c = 0; c < r.continuous.size(); ++c) {
      if (std::isfinite(r.continuous[c])) line += format_double(r.continuous[c]);
      line += ',';
    }
    for (std::size_t c = 0; c < r.categorical.size(); ++c)
      line += csv_quote(schema.vocabularies[c][r.categorical[c]]) + ",";
    line += format_double(r.time) + "," + std::to_string(r.event);
    out << line << '\n';
  }
}

void write_labels_csv(const std::string& path, const Dataset& ds) {
  if (!ds.has_labels() || ds.raw_event_times.empty())
    throw std::logic_error("dataset carries no ground-truth labels");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "class,raw_event_time\n";
  for (int i = 0; i < ds.size(); ++i)
    out << ds.class_labels[i] << ',' << format_double(ds.raw_event_times[i]) << '\n';
}

std::vector<int> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty labels file " + path);
  std::vector<int> labels;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    try {
      labels.push_back(std::stoi(cells.at(0)));
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ": bad class label in row " + std::to_string(row));
    }
  }
  return labels;
}

nlohmann::json schema_to_json(const FeatureSchema& s) {
  json stats = json::array();
  for (const auto& st : s.continuous_stats)
    stats.push_back({{"mean", st.mean}, {"std", st.std}});
  return json{{"time", s.time_col},
              {"event", s.event_col},
              {"continuous", s.continuous_names},
              {"continuous_stats", stats},
              {"categorical", s.categorical_names},
              {"vocabularies", s.vocabularies}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  s.time_col = j.at("time").get<std::string>();
  s.event_col = j.at("event").get<std::string>();
  s.continuous_names = j.at("continuous").get<std::vector<std::string>>();
  for (const auto& st : j.at("continuous_stats"))
    s.continuous_stats.push_back({st.at("mean").get<double>(), st.at("std").get<double>()});
  s.categorical_names = j.at("categorical").get<std::vector<std::string>>();
  s.vocabularies = j.at("vocabularies").get<std::vector<std::vector<std::string>>>();
  return s;
}

nlohmann::json grid_to_json(const TimeGrid& g) {
  json edges = json::array();
  for (Eigen::Index j = 0; j < g.edges.size(); ++j) edges.push_back(g.edges[j]);
  return json{{"bins", g.m}, {"edges", edges}};
}

TimeGrid grid_from_json(const nlohmann::json& j) {
  TimeGrid g;
  g.m = j.at("bins").get<int>();
  const auto& e = j.at("edges");
  g.edges = Vec(static_cast<Eigen::Index>(e.size()));
  for (std::size_t k = 0; k < e.size(); ++k)
    g.edges[static_cast<Eigen::Index>(k)] = e[k].get<double>();
  return g;
}

}  // namespace survmoe::data
