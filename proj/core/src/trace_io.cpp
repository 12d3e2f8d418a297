#include "bfc/trace_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bfc/errors.hpp"
#include "bfc/units.hpp"

namespace bfc {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (*end != '\0' && *end != '\r'))
    throw InvalidParameter(where + ": cannot parse number '" + s + "'");
  return v;
}

const char* value_unit(TraceKind k) {
  switch (k) {
    case TraceKind::g2: return "dimensionless";
    case TraceKind::density: return "1/s";
    case TraceKind::rate: return "arbitrary";
  }
  return "";
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write '" + path + "'");
  out << text;
}

std::string trace_to_csv(const CorrelationTrace& t) {
  std::string s = "tau_ps,value";
  if (!t.stderr_.empty()) s += ",stderr";
  if (!t.envelope.empty()) s += ",envelope";
  if (!t.spike.empty()) s += ",spike";
  s += "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += fmt("%.12g", to_ps(t.tau[i]));
    s += "," + fmt("%.15g", t.value[i]);
    if (!t.stderr_.empty()) s += "," + fmt("%.15g", t.stderr_[i]);
    if (!t.envelope.empty()) s += "," + fmt("%.15g", t.envelope[i]);
    if (!t.spike.empty()) s += "," + fmt("%.15g", t.spike[i]);
    s += "\n";
  }
  return s;
}

CorrelationTrace trace_from_csv(const std::string& text, TraceKind kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidParameter("trace csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto cols = split(line, ',');
  if (cols.size() < 2 || cols[0] != "tau_ps" || cols[1] != "value")
    throw InvalidParameter("trace csv: header must start with tau_ps,value");
  CorrelationTrace t;
  t.kind = kind;
  std::vector<std::vector<double>*> targets{&t.tau, &t.value};
  for (std::size_t c = 2; c < cols.size(); ++c) {
    if (cols[c] == "stderr") targets.push_back(&t.stderr_);
    else if (cols[c] == "envelope") targets.push_back(&t.envelope);
    else if (cols[c] == "spike") targets.push_back(&t.spike);
    else throw InvalidParameter("trace csv: unknown column '" + cols[c] + "'");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = split(line, ',');
    if (f.size() != targets.size())
      throw InvalidParameter("trace csv: wrong field count on line " + std::to_string(row));
    for (std::size_t c = 0; c < f.size(); ++c)
      targets[c]->push_back(parse_double(f[c], "trace csv line " + std::to_string(row)));
  }
  for (auto& x : t.tau) x = ps(x);
  t.validate();
  return t;
}

std::string trace_meta_to_json(const CorrelationTrace& t) {
  json j;
  j["kind"] = to_string(t.kind);
  j["model"] = t.meta.model;
  j["params"] = t.meta.params;
  j["notes"] = t.meta.notes;
  j["units"] = {{"tau", "ps"}, {"value", value_unit(t.kind)}};
  j["points"] = t.size();
  return j.dump(2) + "\n";
}

void trace_meta_from_json(const std::string& text, CorrelationTrace& t) {
  json j = json::parse(text);
  t.kind = trace_kind_from_string(j.at("kind").get<std::string>());
  t.meta.model = j.value("model", std::string{});
  t.meta.params = j.value("params", std::map<std::string, double>{});
  t.meta.notes = j.value("notes", std::map<std::string, std::string>{});
}

void save_trace(const CorrelationTrace& trace, const std::string& base) {
  write_file(base + ".csv", trace_to_csv(trace));
  write_file(base + ".meta.json", trace_meta_to_json(trace));
}

CorrelationTrace load_trace(const std::string& base) {
  CorrelationTrace t = trace_from_csv(read_file(base + ".csv"));
  if (std::filesystem::exists(base + ".meta.json"))
    trace_meta_from_json(read_file(base + ".meta.json"), t);
  return t;
}

std::string histogram_to_csv(const CoincidenceRecord& rec) {
  std::string s = "delay_ps,counts\n";
  for (int r = -rec.half_bins; r <= rec.half_bins; ++r)
    s += fmt("%.12g", to_ps(rec.delay(r))) + "," + std::to_string(rec.at(r)) + "\n";
  return s;
}

std::string record_meta_to_json(const CoincidenceRecord& rec) {
  json j;
  j["half_bins"] = rec.half_bins;
  j["bin_width_ps"] = to_ps(rec.bin_width);
  j["acq_s"] = rec.acq_time;
  if (rec.rep_period) j["rep_period_ps"] = to_ps(*rec.rep_period);
  j["singles_a"] = rec.singles_a;
  j["singles_b"] = rec.singles_b;
  j["coincidences"] = rec.total();
  j["seed"] = rec.seed;
  return j.dump(2) + "\n";
}

std::string timetags_to_text(const CoincidenceRecord& rec) {
  std::string s = "#seed=" + std::to_string(rec.seed) + "\n";
  s += "#acq_ps=" + std::to_string(std::llround(to_ps(rec.acq_time))) + "\n";
  if (rec.rep_period) s += "#rep_ps=" + std::to_string(std::llround(to_ps(*rec.rep_period))) + "\n";
  for (const auto& t : rec.tags) s += std::to_string(t.arm) + "\t" + std::to_string(t.time_ps) + "\n";
  return s;
}

void save_record(const CoincidenceRecord& rec, const std::string& base) {
  write_file(base + ".hist.csv", histogram_to_csv(rec));
  write_file(base + ".record.json", record_meta_to_json(rec));
  if (!rec.tags.empty()) write_file(base + ".tags.txt", timetags_to_text(rec));
}

CoincidenceRecord load_record(const std::string& base) {
  json j = json::parse(read_file(base + ".record.json"));
  CoincidenceRecord rec;
  rec.half_bins = j.at("half_bins").get<int>();
  rec.bin_width = ps(j.at("bin_width_ps").get<double>());
  rec.acq_time = j.at("acq_s").get<double>();
  if (j.contains("rep_period_ps")) rec.rep_period = ps(j["rep_period_ps"].get<double>());
  rec.singles_a = j.at("singles_a").get<std::uint64_t>();
  rec.singles_b = j.at("singles_b").get<std::uint64_t>();
  rec.seed = j.at("seed").get<std::uint64_t>();

  std::istringstream in(read_file(base + ".hist.csv"));
  std::string line;
  std::getline(in, line);
  if (line.rfind("delay_ps,counts", 0) != 0) throw InvalidParameter("histogram csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split(line, ',');
    if (f.size() != 2) throw InvalidParameter("histogram csv: expected two fields");
    rec.histogram.push_back(std::stoull(f[1]));
  }

  if (std::filesystem::exists(base + ".tags.txt")) {
    std::istringstream tin(read_file(base + ".tags.txt"));
    while (std::getline(tin, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = split(line, '\t');
      if (f.size() != 2) throw InvalidParameter("timetags: expected arm<TAB>time_ps");
      rec.tags.push_back({std::stoi(f[0]), std::stoll(f[1])});
    }
  }
  rec.validate();
  return rec;
}

}  // namespace bfc
