// Runs the full verification pipeline on the reference configuration and
// prints one PASS/FAIL line per acceptance criterion. Criterion 15 repeats the
// verify run in a second directory and compares report.csv byte for byte.
//
// usage: acceptance [work_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "nldiff/config.hpp"
#include "nldiff/error.hpp"
#include "nldiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nldiff;

namespace {

const std::map<int, std::string> kTitles{
    {1, "RK4 vs matrix exponential"},     {2, "weighted-mass conservation"},
    {3, "T-contraction"},                 {4, "omega cross-validation"},
    {5, "omega approaches the Gaussian"}, {6, "omega forced equation"},
    {7, "stationary profile"},            {8, "mass decay"},
    {9, "outer limit"},                   {10, "inner limit and compact set"},
    {11, "global limit"},                 {12, "elliptic barrier"},
    {13, "parabolic barrier"},            {14, "bounded component"},
    {15, "determinism of report.csv"}};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

VerifyOutcome timed_verify(const RunConfig& c, const fs::path& log_path) {
  std::ofstream log(log_path);
  const auto t0 = std::chrono::steady_clock::now();
  VerifyOutcome v = run_verify(c, log);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "verify in " << c.output_dir.string() << " took " << fmt(secs) << " s\n";
  return v;
}

void print_line(int id, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << kTitles.at(id)
            << "): " << detail << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::cout << std::unitbuf;
  const fs::path work =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "nldiff_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  try {
    RunConfig reference;
    reference.output_dir = work / "run_a";
    const VerifyOutcome a = timed_verify(reference, work / "run_a.log");

    bool all = true;
    for (const auto& [id, pass] : a.criteria()) {
      std::string detail;
      for (const auto& r : a.rows) {
        if (r.criterion != id) continue;
        if (!detail.empty()) detail += "; ";
        detail += r.name + "=" + fmt(r.measured) + " (target " + fmt(r.predicted) + ", tol " +
                  fmt(r.tolerance) + (r.pass ? ")" : ", miss)");
      }
      print_line(id, pass, detail);
      all = all && pass;
    }

    RunConfig again = reference;
    again.output_dir = work / "run_b";
    timed_verify(again, work / "run_b.log");
    const std::string ra = slurp(reference.output_dir / "report.csv");
    const std::string rb = slurp(again.output_dir / "report.csv");
    const bool same = !ra.empty() && ra == rb;
    print_line(15, same,
               same ? "report.csv identical across two verify runs (" +
                          std::to_string(ra.size()) + " bytes)"
                    : "report.csv differs between " + reference.output_dir.string() + " and " +
                          again.output_dir.string());
    all = all && same;

    std::cout << (all ? "acceptance: all criteria pass\n" : "acceptance: some criteria fail\n");
    return all ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
