#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace shdp {

struct TraceRecord {
  int iteration = 0;
  int num_topics = 0;
  double eta_l2 = 0.0;
  double residual_l2 = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
};

/// Per-sweep scalar statistics of one chain.
struct ChainTrace {
  std::vector<TraceRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  /// Column by name: K, eta_l2, residual_l2, alpha or gamma.
  std::vector<double> statistic(const std::string& name) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      if (name == "K") {
        out.push_back(r.num_topics);
      } else if (name == "eta_l2") {
        out.push_back(r.eta_l2);
      } else if (name == "residual_l2") {
        out.push_back(r.residual_l2);
      } else if (name == "alpha") {
        out.push_back(r.alpha);
      } else if (name == "gamma") {
        out.push_back(r.gamma);
      } else {
        throw ValidationError("unknown trace statistic '" + name + "'");
      }
    }
    return out;
  }
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline constexpr const char* kTraceHeader = "iteration,K,eta_l2,residual_l2,alpha,gamma";

inline void write_trace_csv(std::ostream& out, const ChainTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << r.num_topics << ',' << format_double(r.eta_l2) << ','
        << format_double(r.residual_l2) << ',' << format_double(r.alpha) << ','
        << format_double(r.gamma) << '\n';
  }
}

inline ChainTrace read_trace_csv(std::istream& in) {
  ChainTrace trace;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw ParseError("trace CSV must start with header '" + std::string(kTraceHeader) + "'", 1);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("trace line " + std::to_string(lineno) + ": expected 6 fields", lineno);
    try {
      TraceRecord r;
      r.iteration = std::stoi(cells[0]);
      r.num_topics = std::stoi(cells[1]);
      r.eta_l2 = std::stod(cells[2]);
      r.residual_l2 = std::stod(cells[3]);
      r.alpha = std::stod(cells[4]);
      r.gamma = std::stod(cells[5]);
      trace.records.push_back(r);
    } catch (const std::exception&) {
      throw ParseError("trace line " + std::to_string(lineno) + ": bad number", lineno);
    }
  }
  return trace;
}

inline ChainTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file '" + path + "'");
  return read_trace_csv(in);
}

}  // namespace shdp
