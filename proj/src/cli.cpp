// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string_view>

#include "mxsafe/block_quant.hpp"
#include "mxsafe/error.hpp"
#include "mxsafe/error_metrics.hpp"
#include "mxsafe/safe_mac.hpp"
#include "mxsafe/synthetic.hpp"
#include "mxsafe/tensor_store.hpp"

namespace mxsafe::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void emit(std::ostream& out, std::string_view key, double value) {
  out << "#!" << key << '=' << fmt9(value) << '\n';
}

FormatId format_arg(const std::string& name) {
  const auto f = parse_format(name);
  if (!f || *f == FormatId::Fp5E3M2) throw UsageError("unknown format '" + name + "'");
  return *f;
}

TileShape tile_arg(const std::string& text) {
  try {
    return parse_tile(text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

LayerDims dims_arg(const std::string& text) {
  LayerDims d;
  std::size_t values[3] = {};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t x = text.find('x', start);
    if ((i < 2) == (x == std::string::npos)) throw UsageError("dims must look like MxKxN");
    const std::string part = text.substr(start, i < 2 ? x - start : std::string::npos);
    if (part.empty() || !std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw UsageError("dims must be positive integers");
    values[i] = std::stoull(part);
    if (values[i] == 0) throw UsageError("dims must be positive integers");
    start = x + 1;
  }
  d.m = values[0];
  d.k = values[1];
  d.n = values[2];
  return d;
}

void print_report(std::ostream& out, const ErrorReport& r, std::string_view prefix) {
  const std::string p(prefix);
  emit(out, p + "elements", static_cast<double>(r.element_count));
  emit(out, p + "nonzero", static_cast<double>(r.nonzero_count));
  emit(out, p + "mse", r.mse());
  emit(out, p + "max_err", r.max_abs_err);
  emit(out, p + "underflow_ratio", r.underflow_ratio());
  emit(out, p + "mean_distance", r.mean_distance());
}

struct QuantizeArgs {
  std::string in, out, format = "mxsf", tile = "1x32";
};
struct StatsArgs {
  std::string in, format = "mxsf", tile = "1x32";
};
struct CompareArgs {
  std::string in, formats = "int8,e2m5,e4m3,mxsf", tile = "1x32";
};
struct MatmulArgs {
  std::string a, b, out, mapping = "1d", cfg = "default";
  bool check = false;
};
struct TrainstepArgs {
  std::string dims = "64x64x64", tile = "8x8";
  bool inference = false;
};
struct GenerateArgs {
  std::string out, dist = "gaussian";
  std::size_t rows = 64, cols = 64;
  double sigma = 1.0, value = 1.0;
  std::uint64_t seed = 1;
};
struct InspectArgs {
  std::string in;
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
  const FormatId format = format_arg(a.format);
  const TileShape tile = tile_arg(a.tile);
  const Matrix dense = load_dense(a.in);
  const QuantizedTensor q = quantize_tensor(dense, tile, format);
  save_mxb(a.out, q);
  const ErrorReport r = error_report(dense, q);
  out << "quantized " << dense.rows() << "x" << dense.cols() << " to " << a.format << " with "
      << tile.rows << "x" << tile.cols << " tiles -> " << a.out << '\n';
  emit(out, "blocks", static_cast<double>(q.block_count()));
  emit(out, "underflow_ratio", r.underflow_ratio());
  emit(out, "mean_distance", r.mean_distance());
  return kExitOk;
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const FormatId format = format_arg(a.format);
  const TileShape tile = tile_arg(a.tile);
  const Matrix dense = load_dense(a.in);
  const ErrorReport r = tensor_error_report(dense, format, tile);
  out << "format " << a.format << ", tile " << tile.rows << "x" << tile.cols << '\n';
  print_report(out, r, "");
  for (const auto& [d, n] : r.distance_histogram) {
    emit(out, "hist_d" + std::to_string(d), static_cast<double>(n));
  }
  return kExitOk;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  std::vector<FormatId> formats;
  std::stringstream ss(a.formats);
  for (std::string name; std::getline(ss, name, ',');) formats.push_back(format_arg(name));
  if (formats.empty()) throw UsageError("--formats is empty");
  const TileShape tile = tile_arg(a.tile);
  const Matrix dense = load_dense(a.in);

  char line[128];
  std::snprintf(line, sizeof line, "%-8s %16s %16s %16s\n", "format", "mse", "max_err", "underflow");
  out << line;
  std::vector<std::pair<FormatId, ErrorReport>> reports;
  for (FormatId f : formats) {
    reports.emplace_back(f, tensor_error_report(dense, f, tile));
    const ErrorReport& r = reports.back().second;
    std::snprintf(line, sizeof line, "%-8s %16.9g %16.9g %16.9g\n",
                  std::string(element_format(f).name).c_str(), r.mse(), r.max_abs_err,
                  r.underflow_ratio());
    out << line;
  }
  for (const auto& [f, r] : reports) print_report(out, r, std::string(element_format(f).name) + ".");
  return kExitOk;
}

int cmd_matmul(const MatmulArgs& a, std::ostream& out) {
  Mapping mapping;
  if (a.mapping == "1d") {
    mapping = Mapping::OneD;
  } else if (a.mapping == "tiled") {
    mapping = Mapping::Tiled;
  } else {
    throw UsageError("--mapping must be 1d or tiled");
  }
  MacConfig cfg;
  if (a.cfg == "exact") {
    cfg = MacConfig::exact();
  } else if (a.cfg != "default") {
    throw UsageError("--cfg must be default or exact");
  }
  const QuantizedTensor qa = load_mxb(a.a);
  const QuantizedTensor qb = load_mxb(a.b);
  const MatrixF c = gemm(qa, qb, mapping, cfg);
  Matrix c64(c.rows(), c.cols());
  std::copy(c.data().begin(), c.data().end(), c64.data().begin());
  if (!a.out.empty()) save_dense(a.out, c64);
  emit(out, "rows", static_cast<double>(c.rows()));
  emit(out, "cols", static_cast<double>(c.cols()));
  if (a.check) {
    const Matrix ref = reference_gemm(qa.dequantize(), qb.dequantize());
    double max_ref = 0.0;
    for (double v : ref.data()) max_ref = std::max(max_ref, std::fabs(v));
    double max_abs = 0.0;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double err = std::fabs(c64.data()[i] - ref.data()[i]);
      // Zero references are normalized by the largest reference magnitude.
      const double denom = ref.data()[i] != 0.0 ? std::fabs(ref.data()[i]) : (max_ref > 0.0 ? max_ref : 1.0);
      max_abs = std::max(max_abs, err);
      max_rel = std::max(max_rel, err / denom);
    }
    emit(out, "max_abs_err", max_abs);
    emit(out, "max_rel_err", max_rel);
  }
  return kExitOk;
}

int cmd_trainstep(const TrainstepArgs& a, std::ostream& out) {
  const LayerDims dims = dims_arg(a.dims);
  const TileShape tile = tile_arg(a.tile);
  const StepKind step = a.inference ? StepKind::Inference : StepKind::Training;
  const int events = count_quantization_events(dims, tile, step);
  out << (a.inference ? "inference" : "training") << " step, " << dims.m << "x" << dims.k << "x"
      << dims.n << ", tile " << tile.rows << "x" << tile.cols
      << (tile.is_2d() ? " (2D, transposes reuse blocks)" : " (1D, transposes re-quantize)") << '\n';
  emit(out, "quant_events", events);
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  Matrix m;
  if (a.dist == "gaussian") {
    m = gaussian_matrix(a.rows, a.cols, a.sigma, a.seed);
  } else if (a.dist == "lognormal") {
    m = log_normal_matrix(a.rows, a.cols, a.sigma, a.seed);
  } else if (a.dist == "uniform") {
    m = uniform_matrix(a.rows, a.cols, -a.sigma, a.sigma, a.seed);
  } else if (a.dist == "constant") {
    m = Matrix(a.rows, a.cols, static_cast<float>(a.value));
  } else if (a.dist == "identity") {
    if (a.rows != a.cols) throw UsageError("identity needs rows == cols");
    m = identity_matrix(a.rows);
  } else {
    throw UsageError("unknown distribution '" + a.dist + "'");
  }
  save_dense(a.out, m);
  emit(out, "rows", static_cast<double>(m.rows()));
  emit(out, "cols", static_cast<double>(m.cols()));
  return kExitOk;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const QuantizedTensor q = load_mxb(a.in);
  std::size_t zero_blocks = 0;
  for (const auto& b : q.stored_blocks()) zero_blocks += b.zero_block ? 1 : 0;
  out << element_format(q.format()).name << " " << q.rows() << "x" << q.cols() << ", tile "
      << q.tile().rows << "x" << q.tile().cols << '\n';
  emit(out, "format_id", static_cast<double>(q.format()));
  emit(out, "rows", static_cast<double>(q.rows()));
  emit(out, "cols", static_cast<double>(q.cols()));
  emit(out, "tile_rows", q.tile().rows);
  emit(out, "tile_cols", q.tile().cols);
  emit(out, "blocks", static_cast<double>(q.block_count()));
  emit(out, "zero_blocks", static_cast<double>(zero_blocks));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Microscaling (MX) block quantization toolkit", "mxsafe"};
  app.require_subcommand(1);

  const std::string format_help = "int8|e4m3|e5m2|e2m5|mxsf|e2m1|e2m3|e3m2";

  QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Quantize a dense tensor file into an .mxb file");
  quantize->add_option("--in", qa.in, "Dense input tensor")->required();
  quantize->add_option("--out", qa.out, "Output .mxb file")->required();
  quantize->add_option("--format", qa.format, format_help)->capture_default_str();
  quantize->add_option("--tile", qa.tile, "Block tile RxC")->capture_default_str();

  StatsArgs sa;
  auto* stats = app.add_subcommand("stats", "Quantization error report for one format");
  stats->add_option("--in", sa.in, "Dense input tensor")->required();
  stats->add_option("--format", sa.format, format_help)->capture_default_str();
  stats->add_option("--tile", sa.tile, "Block tile RxC")->capture_default_str();

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Side-by-side MSE/underflow table");
  compare->add_option("--in", ca.in, "Dense input tensor")->required();
  compare->add_option("--formats", ca.formats, "Comma-separated formats")->capture_default_str();
  compare->add_option("--tile", ca.tile, "Block tile RxC")->capture_default_str();

  MatmulArgs ma;
  auto* matmul = app.add_subcommand("matmul", "GEMM of two .mxb tensors on the SAFE-MAC model");
  matmul->add_option("--a", ma.a, "Left operand (.mxb)")->required();
  matmul->add_option("--b", ma.b, "Right operand (.mxb)")->required();
  matmul->add_option("--out", ma.out, "Dense output tensor");
  matmul->add_option("--mapping", ma.mapping, "1d|tiled")->capture_default_str();
  matmul->add_option("--cfg", ma.cfg, "default|exact")->capture_default_str();
  matmul->add_flag("--check", ma.check, "Compare against a binary64 reference GEMM");

  TrainstepArgs ta;
  auto* trainstep = app.add_subcommand("trainstep", "Count quantization passes in one linear-layer step");
  trainstep->add_option("--dims", ta.dims, "MxKxN")->capture_default_str();
  trainstep->add_option("--tile", ta.tile, "Block tile RxC")->capture_default_str();
  trainstep->add_flag("--inference", ta.inference, "Forward pass only");

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "Write a reproducible synthetic dense tensor");
  generate->add_option("--out", ga.out, "Dense output tensor")->required();
  generate->add_option("--dist", ga.dist, "gaussian|lognormal|uniform|constant|identity")
      ->capture_default_str();
  generate->add_option("--rows", ga.rows)->capture_default_str();
  generate->add_option("--cols", ga.cols)->capture_default_str();
  generate->add_option("--sigma", ga.sigma, "Std-dev (log2 domain for lognormal, half-width for uniform)")
      ->capture_default_str();
  generate->add_option("--value", ga.value, "Fill value for constant")->capture_default_str();
  generate->add_option("--seed", ga.seed)->capture_default_str();

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Print the header of an .mxb file");
  inspect->add_option("--in", ia.in, ".mxb file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*quantize) return cmd_quantize(qa, out);
    if (*stats) return cmd_stats(sa, out);
    if (*compare) return cmd_compare(ca, out);
    if (*matmul) return cmd_matmul(ma, out);
    if (*trainstep) return cmd_trainstep(ta, out);
    if (*generate) return cmd_generate(ga, out);
    if (*inspect) return cmd_inspect(ia, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("mxsafe");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mxsafe::cli
