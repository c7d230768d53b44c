#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinojump/episode.hpp"
#include "kinojump/search.hpp"

namespace kinojump {

/// Stable numeric formatting shared by every CSV writer; %.9g keeps the
/// output byte-identical across runs for identical values.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string csv_num(std::int64_t v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Minimal CSV reader (no quoting; our writers never emit commas in cells).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

/// Route export: one sample per line, t / position / velocity / acceleration.
inline const char* kRouteCsvHeader = "t,px,py,pz,vx,vy,vz,ax,ay,az";

inline void write_route_csv(const Route& route, const std::string& path) {
  CsvWriter w(path);
  w.row({"t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az"});
  double t = 0.0;
  for (std::size_t i = 0; i < route.nodes.size(); ++i) {
    const SearchNode& n = route.nodes[i];
    const Vec3 a = i + 1 < route.nodes.size() ? route.nodes[i + 1].motion_from_parent.accel
                                              : Vec3::Zero();
    w.row({csv_num(t), csv_num(n.state.position.x()), csv_num(n.state.position.y()),
           csv_num(n.state.position.z()), csv_num(n.state.velocity.x()),
           csv_num(n.state.velocity.y()), csv_num(n.state.velocity.z()), csv_num(a.x()),
           csv_num(a.y()), csv_num(a.z())});
    if (i + 1 < route.nodes.size()) t += route.nodes[i + 1].motion_from_parent.duration;
  }
}

inline const char* kTraceCsvHeader =
    "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,ref_px,ref_py,ref_pz,ref_vx,ref_vy,ref_vz,"
    "u0,u1,u2,u3,ef_true_x,ef_true_y,ef_true_z,ef_est_x,ef_est_y,ef_est_z,"
    "solver_iters,solver_kkt,solver_ms,solver_converged,replanned";

inline void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  CsvWriter w(path);
  {
    std::vector<std::string> hdr;
    std::stringstream ss(kTraceCsvHeader);
    std::string c;
    while (std::getline(ss, c, ',')) hdr.push_back(c);
    w.row(hdr);
  }
  for (const TraceRow& r : trace) {
    const QuadState& s = r.state;
    w.row({csv_num(r.t),
           csv_num(s.position.x()), csv_num(s.position.y()), csv_num(s.position.z()),
           csv_num(s.velocity.x()), csv_num(s.velocity.y()), csv_num(s.velocity.z()),
           csv_num(s.attitude.w()), csv_num(s.attitude.x()), csv_num(s.attitude.y()),
           csv_num(s.attitude.z()),
           csv_num(s.body_rate.x()), csv_num(s.body_rate.y()), csv_num(s.body_rate.z()),
           csv_num(r.ref_position.x()), csv_num(r.ref_position.y()), csv_num(r.ref_position.z()),
           csv_num(r.ref_velocity.x()), csv_num(r.ref_velocity.y()), csv_num(r.ref_velocity.z()),
           csv_num(r.input(0)), csv_num(r.input(1)), csv_num(r.input(2)), csv_num(r.input(3)),
           csv_num(r.e_f_true.x()), csv_num(r.e_f_true.y()), csv_num(r.e_f_true.z()),
           csv_num(r.e_f_est.x()), csv_num(r.e_f_est.y()), csv_num(r.e_f_est.z()),
           csv_num(r.solver_iterations), csv_num(r.solver_kkt), csv_num(r.solver_ms),
           std::string(r.solver_converged ? "1" : "0"), std::string(r.replanned ? "1" : "0")});
  }
}

/// Corridor export for debugging/plotting: one block per polyhedron, one
/// half-space per row.
inline void write_corridor_text(const Corridor& corridor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_corridor_text: cannot open " + path);
  for (std::size_t i = 0; i < corridor.polyhedra.size(); ++i) {
    out << "polyhedron " << i << "\n";
    for (const Polyhedron::Halfspace& h : corridor.polyhedra[i].halfspaces)
      out << "  " << csv_num(h.normal.x()) << ' ' << csv_num(h.normal.y()) << ' '
          << csv_num(h.normal.z()) << ' ' << csv_num(h.offset) << "\n";
  }
}

}  // namespace kinojump
