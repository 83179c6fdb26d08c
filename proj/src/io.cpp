#include "latentprobe/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace lp::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

bool is_missing(const std::string& field) {
  return field.empty() || field == "nan" || field == "NaN" || field == "NA";
}

}  // namespace

probe::AttributeTable load_attributes_csv(const std::filesystem::path& path,
                                          const hin::HinGraph& graph) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open attribute csv: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty attribute csv: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "entity_id")
    throw std::runtime_error("attribute csv must start with entity_id header");
  std::size_t n = graph.entity_count();
  std::size_t n_attrs = header.size() - 1;
  std::vector<std::vector<double>> values(n_attrs, std::vector<double>(n, 0.0));
  std::vector<std::vector<std::uint8_t>> covered(n_attrs,
                                                 std::vector<std::uint8_t>(n, 0));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw std::runtime_error("attribute csv row has wrong arity at line " +
                               std::to_string(line_no));
    auto id = graph.find_entity(fields[0]);
    if (!id)
      throw std::runtime_error("unknown entity '" + fields[0] + "' at line " +
                               std::to_string(line_no));
    for (std::size_t a = 0; a < n_attrs; ++a) {
      if (is_missing(fields[a + 1])) continue;
      values[a][*id] = std::stod(fields[a + 1]);
      covered[a][*id] = 1;
    }
  }
  probe::AttributeTable table;
  table.n = n;
  for (std::size_t a = 0; a < n_attrs; ++a)
    table.add(header[a + 1], std::move(values[a]), std::move(covered[a]));
  return table;
}

void write_attributes_csv(const probe::AttributeTable& table,
                          const hin::HinGraph& graph,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write attribute csv: " + path.string());
  out << "entity_id";
  for (const auto& [name, vals] : table.values) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.n; ++i) {
    out << graph.entity_name(static_cast<hin::EntityId>(i));
    for (const auto& [name, vals] : table.values) {
      if (table.mask_of(name)[i]) {
        std::snprintf(buf, sizeof(buf), "%.17g", vals[i]);
        out << ',' << buf;
      } else {
        out << ',';
      }
    }
    out << '\n';
  }
}

rec::TopicTable load_topics_csv(const std::filesystem::path& path,
                                const hin::HinGraph& graph) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topic csv: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty topic csv: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "entity_id")
    throw std::runtime_error("topic csv must start with entity_id header");
  rec::TopicTable topics;
  topics.n = graph.entity_count();
  topics.n_topics = header.size() - 1;
  topics.rows.assign(topics.n * topics.n_topics,
                     std::numeric_limits<double>::quiet_NaN());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw std::runtime_error("topic csv row has wrong arity at line " +
                               std::to_string(line_no));
    auto id = graph.find_entity(fields[0]);
    if (!id)
      throw std::runtime_error("unknown entity '" + fields[0] + "' at line " +
                               std::to_string(line_no));
    for (std::size_t t = 0; t < topics.n_topics; ++t)
      topics.rows[*id * topics.n_topics + t] = std::stod(fields[t + 1]);
  }
  topics.validate();
  return topics;
}

void write_topics_csv(const rec::TopicTable& topics, const hin::HinGraph& graph,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topic csv: " + path.string());
  out << "entity_id";
  for (std::size_t t = 0; t < topics.n_topics; ++t) out << ",t" << t;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < topics.n; ++i) {
    if (!topics.covered(i)) continue;
    out << graph.entity_name(static_cast<hin::EntityId>(i));
    for (double v : topics.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<std::vector<std::string>> load_tokens_tsv(
    const std::filesystem::path& path, const hin::HinGraph& graph) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open token file: " + path.string());
  std::vector<std::vector<std::string>> tokens(graph.entity_count());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("expected entity<TAB>token at line " +
                               std::to_string(line_no));
    auto id = graph.find_entity(line.substr(0, tab));
    if (!id)
      throw std::runtime_error("unknown entity at line " + std::to_string(line_no));
    tokens[*id].push_back(line.substr(tab + 1));
  }
  return tokens;
}

}  // namespace lp::io
