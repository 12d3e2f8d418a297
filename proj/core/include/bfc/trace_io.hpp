#pragma once

#include <string>

#include "bfc/correlator.hpp"
#include "bfc/photosim.hpp"

namespace bfc {

// CSV columns: tau_ps,value[,stderr][,envelope][,spike].
std::string trace_to_csv(const CorrelationTrace& trace);
CorrelationTrace trace_from_csv(const std::string& text, TraceKind kind = TraceKind::g2);

// Sidecar document: kind, model, params, notes, units.
std::string trace_meta_to_json(const CorrelationTrace& trace);
void trace_meta_from_json(const std::string& text, CorrelationTrace& trace);

// Writes <base>.csv and <base>.meta.json.
void save_trace(const CorrelationTrace& trace, const std::string& base);
CorrelationTrace load_trace(const std::string& base);

// Histogram CSV: delay_ps,counts.
std::string histogram_to_csv(const CoincidenceRecord& rec);
// Everything except the histogram and tags.
std::string record_meta_to_json(const CoincidenceRecord& rec);
// Timetags: arm<TAB>time_ps with #seed=, #acq_ps=, #rep_ps= headers.
std::string timetags_to_text(const CoincidenceRecord& rec);

// Writes <base>.hist.csv, <base>.record.json and, when tags exist, <base>.tags.txt.
void save_record(const CoincidenceRecord& rec, const std::string& base);
CoincidenceRecord load_record(const std::string& base);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace bfc
