// SPDX-License-Identifier: Apache-2.0
//
// transdot: single-op evaluation, vector generation/checking and cost reports.
//
// Exit codes: 0 success, 1 vector mismatch, 2 usage or input error.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "transdot/costmodel.hpp"
#include "transdot/datapath.hpp"
#include "transdot/formats.hpp"
#include "transdot/vectors.hpp"

namespace {

using namespace transdot;
namespace tv = transdot::vectors;

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

struct UsageError {
  std::string message;
};

std::optional<std::uint32_t> parse_hex(std::string s, int max_digits) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s = s.substr(2);
  if (s.empty() || static_cast<int>(s.size()) > max_digits) return std::nullopt;
  std::uint32_t v = 0;
  for (char ch : s) {
    int d;
    if (ch >= '0' && ch <= '9') {
      d = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      d = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      d = ch - 'A' + 10;
    } else {
      return std::nullopt;
    }
    v = (v << 4) | static_cast<std::uint32_t>(d);
  }
  return v;
}

Format require_format(const std::string& flag, const std::string& value) {
  const auto f = parse_format(value);
  if (!f) throw UsageError{flag + ": unknown format '" + value + "' (fp32, fp16, fp8, fp4)"};
  return *f;
}

std::uint32_t require_hex(const std::string& flag, const std::string& value, int digits) {
  const auto v = parse_hex(value, digits);
  if (!v) throw UsageError{flag + ": malformed hex word '" + value + "' (at most " + std::to_string(digits) + " digits)"};
  return *v;
}

struct Globals {
  std::string fp8_profile = "extended";
  Profile profile() const { return *tv::parse_profile(fp8_profile); }
};

// --- op --------------------------------------------------------------------

struct OpArgs {
  std::string kind = "fma";
  std::string in = "fp32";
  std::string acc;
  int terms = 0;
  std::string a, b, c;
};

int run_op(const Globals& g, const OpArgs& args) {
  const Profile p = g.profile();
  tv::VectorRecord r;
  const auto kind = args.kind == "fma" ? std::optional(OpKind::fma_scalar)
                    : args.kind == "simd" ? std::optional(OpKind::fma_simd)
                    : args.kind == "dpa" ? std::optional(OpKind::dpa)
                                         : std::nullopt;
  if (!kind) throw UsageError{"--kind: unknown kind '" + args.kind + "' (fma, simd, dpa)"};
  r.kind = *kind;
  r.fmt_in = require_format("--in", args.in);
  r.fmt_acc = args.acc.empty() ? (r.kind == OpKind::dpa ? Format::fp32 : r.fmt_in) : require_format("--acc", args.acc);
  const FormatSpec in = format_spec(r.fmt_in, p);
  const FormatSpec acc = format_spec(r.fmt_acc, p);
  r.terms = args.terms ? args.terms : terms_for(r.kind, in);
  if (!is_supported(r.kind, in, acc, r.terms)) {
    throw UsageError{"--kind: unsupported mode " + args.kind + " " + std::string(to_string(r.fmt_in)) + " -> " +
                     std::string(to_string(r.fmt_acc)) + " with " + std::to_string(r.terms) + " terms"};
  }
  const int in_digits = r.kind == OpKind::fma_scalar ? in.total_bits / 4 : 8;
  r.a = require_hex("--a", args.a, in_digits);
  r.b = require_hex("--b", args.b, in_digits);
  r.c = require_hex("--c", args.c, tv::acc_digits(r));
  const tv::Outcome o = tv::run_datapath(r, p);
  const FormatSpec out_fmt = r.kind == OpKind::fma_simd ? in : acc;
  std::cout << tv::hex(o.word, tv::acc_digits(r)) << ' ' << tv::flags_field(o) << " ("
            << tv::describe(out_fmt, o.word, o.lanes) << ")\n";
  return kExitOk;
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
  std::string mode;
  std::string acc = "fp32";
  std::string strategy = "random";
  std::uint64_t count = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen(const Globals& g, const GenArgs& args) {
  tv::GenOptions opt;
  const Format acc = require_format("--acc", args.acc);
  const auto mode = tv::parse_mode(args.mode, acc);
  if (!mode) throw UsageError{"--mode: unknown or unsupported mode '" + args.mode + "' with accumulator " + args.acc};
  const auto strategy = tv::parse_strategy(args.strategy);
  if (!strategy) throw UsageError{"--strategy: unknown strategy '" + args.strategy + "' (random, corners, exhaustive)"};
  opt.mode = *mode;
  opt.strategy = *strategy;
  opt.count = args.count;
  opt.seed = args.seed;
  opt.fp8_profile = g.profile();
  opt.jobs = tv::default_jobs();
  if (opt.strategy == tv::Strategy::exhaustive && tv::input_space_bits(opt.mode) > tv::kMaxExhaustiveBits) {
    throw UsageError{"--strategy: exhaustive " + args.mode + " needs 2^" + std::to_string(tv::input_space_bits(opt.mode)) +
                     " records; the limit is 2^" + std::to_string(tv::kMaxExhaustiveBits)};
  }
  if (args.out.empty() || args.out == "-") {
    std::ios::sync_with_stdio(false);
    tv::generate(opt, std::cout);
    std::cout.flush();
  } else {
    std::ofstream os(args.out);
    if (!os) throw UsageError{"--out: cannot open '" + args.out + "' for writing"};
    tv::generate(opt, os);
    if (!os) throw UsageError{"--out: write to '" + args.out + "' failed"};
  }
  return kExitOk;
}

// --- check -----------------------------------------------------------------

struct CheckArgs {
  std::string file;
  std::size_t max_mismatches = 10;
};

int run_check(const CheckArgs& args) {
  std::ifstream file;
  std::istream* is = &std::cin;
  if (args.file != "-") {
    file.open(args.file);
    if (!file) throw UsageError{"FILE: cannot open '" + args.file + "'"};
    is = &file;
  }
  tv::CheckSummary sum;
  try {
    sum = tv::check(*is, tv::default_jobs(), args.max_mismatches);
  } catch (const tv::FormatError& e) {
    throw UsageError{args.file + ": " + e.what()};
  }
  std::cout << "records " << sum.records << "  passed " << sum.passed << "  failed " << sum.failed;
  if (sum.unchecked) std::cout << "  unchecked " << sum.unchecked;
  std::cout << '\n';
  for (const auto& m : sum.first_mismatches) {
    const auto& r = m.record;
    const FormatSpec out_fmt = format_spec(r.kind == OpKind::fma_simd ? r.fmt_in : r.fmt_acc, sum.profile);
    std::cout << "mismatch at line " << m.line << ": " << tv::format_record(r) << '\n'
              << "  expected " << tv::hex(r.expected->word, tv::acc_digits(r)) << ' ' << tv::flags_field(*r.expected)
              << " (" << tv::describe(out_fmt, r.expected->word, r.expected->lanes) << ")\n"
              << "  got      " << tv::hex(m.got.word, tv::acc_digits(r)) << ' ' << tv::flags_field(m.got) << " ("
              << tv::describe(out_fmt, m.got.word, m.got.lanes) << ")\n";
  }
  return sum.failed ? kExitMismatch : kExitOk;
}

// --- cost ------------------------------------------------------------------

struct CostArgs {
  std::vector<long> n;
  double clock = 1.0;
  std::string format = "text";
};

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v << '%';
  return os.str();
}

std::string number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int run_cost(const CostArgs& args) {
  if (args.format != "text" && args.format != "json") throw UsageError{"--format: expected text or json, got '" + args.format + "'"};
  if (!(args.clock > 0)) throw UsageError{"--clock: clock must be positive"};
  const std::vector<long> widths = args.n.empty() ? std::vector<long>{64, 128} : args.n;
  std::vector<cost::CostReport> reports;
  for (long n : widths) {
    try {
      reports.push_back(cost::cost_report(n));
    } catch (const InvalidWidth& e) {
      throw UsageError{"--n: " + std::string(e.what())};
    }
  }
  const auto rows = cost::throughput_table();

  if (args.format == "json") {
    nlohmann::ordered_json j;
    j["shifter"] = nlohmann::json::array();
    for (const auto& r : reports) {
      j["shifter"].push_back({{"n", r.n},
                              {"base_mux", r.base_mux},
                              {"extra_mux_reconfig", r.extra_mux_reconfig},
                              {"extra_mux_multilane", r.extra_mux_multilane},
                              {"overhead_reconfig", r.overhead_reconfig},
                              {"overhead_multilane", r.overhead_multilane}});
    }
    j["clock_ghz"] = args.clock;
    j["throughput"] = nlohmann::json::array();
    for (const auto& row : rows) {
      j["throughput"].push_back({{"mode", row.label},
                                 {"latency", row.timing.latency},
                                 {"throughput", row.timing.throughput},
                                 {"flops_per_cycle", row.flops_per_cycle()},
                                 {"gflops", row.gflops(args.clock)}});
    }
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }

  for (const auto& r : reports) {
    std::cout << "n=" << r.n << "  base " << r.base_mux << " mux\n"
              << "  reconfigurable extra " << r.extra_mux_reconfig << " mux, overhead "
              << percent(r.overhead_reconfig) << '\n'
              << "  multi-lane extra     " << r.extra_mux_multilane << " mux, overhead "
              << percent(r.overhead_multilane) << '\n';
  }
  std::cout << "\nthroughput at " << number(args.clock) << " GHz\n";
  for (const auto& row : rows) {
    std::cout << "  " << std::left << std::setw(24) << row.label << std::right << "  " << row.timing.latency << '/'
              << row.timing.throughput << "  " << std::setw(2) << row.flops_per_cycle() << " flop/cycle  "
              << number(row.gflops(args.clock)) << " GFLOP/s\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TransDot reconfigurable FPU model"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--fp8-profile", g.fp8_profile, "FP8 encoding profile")
      ->check(CLI::IsMember({"extended", "ieee"}));

  OpArgs op;
  auto* op_cmd = app.add_subcommand("op", "evaluate one operation");
  op_cmd->add_option("--kind", op.kind, "fma, simd or dpa")->required();
  op_cmd->add_option("--in", op.in, "input format")->required();
  op_cmd->add_option("--acc", op.acc, "accumulator format (default: input format, fp32 for dpa)");
  op_cmd->add_option("--terms", op.terms, "dot-product terms (default: from the input format)");
  op_cmd->add_option("--a", op.a, "a operand, hex")->required();
  op_cmd->add_option("--b", op.b, "b operand, hex")->required();
  op_cmd->add_option("--c", op.c, "addend, hex")->required();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a vector file with oracle expectations");
  gen_cmd->add_option("--mode", gen.mode, "e.g. fp8-fma, fp16-simd2, fp8-dpa4, fp4-dpa8")->required();
  gen_cmd->add_option("--acc", gen.acc, "DPA accumulator format")->capture_default_str();
  gen_cmd->add_option("--strategy", gen.strategy, "random, corners or exhaustive")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "records for the random strategy")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output file (default stdout)");

  CheckArgs chk;
  auto* check_cmd = app.add_subcommand("check", "run the datapath over a vector file");
  check_cmd->add_option("FILE", chk.file, "vector file, or - for stdin")->required();
  check_cmd->add_option("--max-mismatches", chk.max_mismatches, "mismatches to print")->capture_default_str();

  CostArgs cst;
  auto* cost_cmd = app.add_subcommand("cost", "shifter cost and throughput report");
  cost_cmd->add_option("--n", cst.n, "shifter width (repeatable)");
  cost_cmd->add_option("--clock", cst.clock, "clock in GHz")->capture_default_str();
  cost_cmd->add_option("--format", cst.format, "text or json")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*op_cmd) return run_op(g, op);
    if (*gen_cmd) return run_gen(g, gen);
    if (*check_cmd) return run_check(chk);
    if (*cost_cmd) return run_cost(cst);
  } catch (const UsageError& e) {
    std::cerr << "transdot: " << e.message << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "transdot: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
