// Command-line front end: one subcommand per library stage.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exb/base_barriers.hpp"
#include "exb/cone_barrier.hpp"
#include "exb/error.hpp"
#include "exb/exceptional_sets.hpp"
#include "exb/experiments.hpp"
#include "exb/kernels.hpp"
#include "exb/pucci.hpp"
#include "exb/solver.hpp"

using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCertification = 2;

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw exb::IoError("cannot read " + path);
  try {
    json j;
    is >> j;
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1) {
      throw exb::ConfigError(path + ": schema_version must be 1");
    }
    return j;
  } catch (const json::exception& e) {
    throw exb::ConfigError(path + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream os(path);
  if (!os) throw exb::IoError("cannot write " + path);
  return os;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream os = open_out(out);
  os << j.dump(2) << '\n';
}

exb::SymMatrix read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw exb::IoError("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw exb::InvalidInput(path + ": not a number: '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0 || n > 6) throw exb::InvalidInput(path + ": matrix must be n x n with 1 <= n <= 6");
  std::vector<double> full;
  for (const auto& r : rows) {
    if (r.size() != n) throw exb::InvalidInput(path + ": matrix is not square");
    full.insert(full.end(), r.begin(), r.end());
  }
  double scale = 0.0;
  for (double v : full) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(full[i * n + j] - full[j * n + i]) > 1e-12 * std::max(scale, 1.0))
        throw exb::InvalidInput(path + ": matrix is not symmetric");
  return exb::SymMatrix::from_full(static_cast<int>(n), full);
}

exb::SampleGrid sample_grid_from(const json& j) {
  exb::SampleGrid g;
  if (!j.contains("grid")) return g;
  const auto& s = j.at("grid");
  g.nt = s.value("nt", g.nt);
  g.nr = s.value("nr", g.nr);
  g.ndir = s.value("ndir", g.ndir);
  g.radius = s.value("radius", g.radius);
  g.t_floor = s.value("t_floor", g.t_floor);
  g.seed = s.value("seed", g.seed);
  return g;
}

json certificate_json(const exb::BarrierCertificate& c) {
  return {{"passed", true}, {"gamma", c.gamma}, {"T_star", c.T_star}, {"margin", c.margin}, {"samples", c.samples}};
}

json failure_json(const exb::CertificationFailure& e) {
  return {{"passed", false}, {"error", e.what()}, {"witness", e.point()}, {"lhs", e.lhs()}, {"rhs", e.rhs()}};
}

// Initial / lateral data for `solve`: zero, constant, gaussian bump or the
// heat kernel (exact solution when lambda = Lambda and there are no
// lower-order terms).
struct DataSpec {
  std::string kind = "zero";
  double value = 0.0;
  double s0 = 0.05;
  double amplitude = 1.0;
};

DataSpec data_spec(const json& j, const char* key) {
  DataSpec d;
  if (!j.contains(key)) return d;
  const auto& s = j.at(key);
  d.kind = s.value("kind", d.kind);
  d.value = s.value("value", d.value);
  d.s0 = s.value("s0", d.s0);
  d.amplitude = s.value("amplitude", d.amplitude);
  if (d.kind != "zero" && d.kind != "constant" && d.kind != "gaussian" && d.kind != "heat_kernel") {
    throw exb::ConfigError(std::string(key) + ".kind must be zero, constant, gaussian or heat_kernel");
  }
  return d;
}

double heat_kernel(std::span<const double> x, double t, double s0, double lambda) {
  // Solution of u_t = lambda * Laplacian started from exp(-|x|^2 / (4 lambda s0)) (scaled).
  const double n = static_cast<double>(x.size());
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double s = s0 + t;
  return std::pow(s0 / s, 0.5 * n) * std::exp(-r2 / (4.0 * lambda * s));
}

double eval_data(const DataSpec& d, std::span<const double> x, double t, double lambda) {
  if (d.kind == "constant") return d.value;
  if (d.kind == "gaussian" || d.kind == "heat_kernel") {
    const double tt = d.kind == "heat_kernel" ? t : 0.0;
    return d.amplitude * heat_kernel(x, tt, d.s0, lambda);
  }
  return 0.0;
}

int run_solve(const std::string& config, const std::string& out) {
  const json j = read_json(config);
  const exb::EllipticityPair ell = exb::ellipticity_from_json(j.at("ellipticity"));
  const auto& g = j.at("grid");
  const int dim = g.value("dim", 2);
  const exb::Grid grid = exb::Grid::cube(dim, g.value("lo", -1.0), g.value("hi", 1.0), g.value("cells", 64));
  const double T = j.at("T").get<double>();
  const DataSpec init = data_spec(j, "initial");
  const DataSpec lat = j.contains("lateral") ? data_spec(j, "lateral") : init;
  exb::Coefficients coeffs;
  std::vector<double> drift = j.value("drift", std::vector<double>{});
  if (!drift.empty()) {
    if (static_cast<int>(drift.size()) != dim) throw exb::ConfigError("drift must have one entry per axis");
    double K = 0.0;
    for (double b : drift) K = std::max(K, std::abs(b));
    coeffs.K = K;
    coeffs.drift = [drift](std::span<const double>, double, std::span<double> b) {
      std::copy(drift.begin(), drift.end(), b.begin());
    };
  }
  if (j.contains("c")) {
    const double c = j.at("c").get<double>();
    coeffs.c = [c](std::span<const double>, double) { return c; };
  }
  exb::GridCylinder cyl(
      grid, T, ell, coeffs.K, [&](std::span<const double> x) { return eval_data(init, x, 0.0, ell.lambda); },
      [&](std::span<const double> x, double t) { return eval_data(lat, x, t, ell.lambda); });
  exb::SolveOptions opts;
  opts.save_every = j.value("save_every", 0);
  const auto field = exb::solve(cyl, coeffs, ell, opts);

  std::filesystem::create_directories(out);
  const auto dir = std::filesystem::path(out);
  exb::write_csv(field, (dir / "field.csv").string());
  exb::write_binary(field, (dir / "field.bin").string());
  json summary{{"steps", cyl.steps},     {"dt", cyl.dt},           {"h", grid.h},
               {"slabs", field.slabs.size()}, {"min", field.min()}, {"max", field.max()},
               {"kernel", exb::to_string(exb::active_kernel())}};
  if (init.kind == "heat_kernel" && lat.kind == "heat_kernel") {
    double err = 0.0;
    std::vector<double> x(static_cast<std::size_t>(dim));
    const auto& last = field.slabs.back();
    for (std::size_t i = 0; i < last.size(); ++i) {
      grid.coords(i, x);
      err = std::max(err, std::abs(last[i] - eval_data(init, x, field.times.back(), ell.lambda)));
    }
    summary["max_error_vs_heat_kernel"] = err;
  }
  emit(summary, (dir / "summary.json").string());
  std::cout << summary.dump() << '\n';
  return kOk;
}

int run_experiment_cmd(const std::string& which, const std::string& config, const std::string& out) {
  json j = read_json(config);
  j["experiment"] = which;
  auto cfg = exb::ExperimentConfig::from_json(j);
  auto report = exb::run_experiment(cfg);
  exb::emit_report(report, out);
  const bool ok = report.cases_ok && report.Lw_ok && report.trend_ok;
  std::cout << "experiment " << which << ": trend " << (report.trend_ok ? "ok" : "FAILED") << ", cases "
            << (report.cases_ok ? "ok" : "FAILED") << ", L w " << (report.Lw_ok ? "ok" : "FAILED") << ", hash "
            << report.hash() << '\n';
  for (const auto& a : report.artifacts) std::cout << "  " << a << '\n';
  return ok ? kOk : kCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier certification, Pucci solver and exceptional-set experiments"};
  app.require_subcommand(1);

  std::string matrix, config, out, kind = "regular", which;
  double lambda = 1.0, Lambda = 1.0, theta0 = 0.75 * std::numbers::pi;
  double ratio = 1.0 / 3.0, mu = 0.7, epsilon = 0.1, nu = 1.0;
  int n = 2, level = 0;
  bool minus = false;

  auto* pe = app.add_subcommand("pucci-eval", "Evaluate M+ (or M-) of a symmetric matrix given as CSV");
  pe->add_option("--matrix", matrix, "CSV file, one matrix row per line")->required();
  pe->add_option("--lambda", lambda)->required();
  pe->add_option("--Lambda", Lambda)->required();
  pe->add_flag("--minus", minus, "Evaluate M- instead of M+");

  auto* cpsi = app.add_subcommand("certify-psi", "Certify the psi barrier from a JSON config");
  cpsi->add_option("--config", config)->required();
  cpsi->add_option("--out", out, "Output JSON (stdout when omitted)");

  auto* cphi = app.add_subcommand("certify-phi", "Certify the phi barrier from a JSON config");
  cphi->add_option("--config", config)->required();
  cphi->add_option("--out", out, "Output JSON (stdout when omitted)");

  auto* bcb = app.add_subcommand("build-cone-barrier", "Build and certify a regular or singular cone barrier");
  bcb->add_option("--theta0", theta0, "Cone aperture in radians")->required();
  bcb->add_option("--lambda", lambda)->required();
  bcb->add_option("--Lambda", Lambda)->required();
  bcb->add_option("--n", n)->required();
  bcb->add_option("--kind", kind)->check(CLI::IsMember({"regular", "singular"}));
  bcb->add_option("--out", out)->required();

  auto* cov = app.add_subcommand("cover", "Ball cover of a Cantor set on [0, 1]");
  cov->add_option("--ratio", ratio)->required();
  cov->add_option("--level", level, "Starting level")->required();
  cov->add_option("--mu", mu)->required();
  cov->add_option("--epsilon", epsilon)->required();
  cov->add_option("--nu", nu, "Upper bound on the ball radius");
  cov->add_option("--out", out)->required();

  auto* sol = app.add_subcommand("solve", "Run the explicit solver from a JSON config");
  sol->add_option("--config", config)->required();
  sol->add_option("--out", out, "Output directory")->required();

  auto* exp = app.add_subcommand("experiment", "Run the base or lateral exceptional-set experiment");
  exp->add_option("which", which)->required()->check(CLI::IsMember({"base", "lateral"}));
  exp->add_option("--config", config)->required();
  exp->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*pe) {
      const exb::EllipticityPair ell(lambda, Lambda);
      const auto m = read_matrix_csv(matrix);
      const double v = minus ? exb::pucci_minus(m, ell) : exb::pucci_plus(m, ell);
      std::printf("%.17g\n", v);
      return kOk;
    }
    if (*cpsi || *cphi) {
      const json j = read_json(config);
      const auto ell = exb::ellipticity_from_json(j.at("ellipticity"));
      const auto cb = j.contains("coefficients") ? exb::coefficients_from_json(j.at("coefficients"))
                                                 : exb::CoefficientBounds{};
      const int dim = j.value("n", 2);
      const double T = j.value("T", 1.0);
      const auto grid = sample_grid_from(j);
      try {
        if (*cpsi) {
          const exb::BaseBarrierParams p{j.at("alpha").get<double>(), j.at("sigma").get<double>(), dim};
          emit(certificate_json(exb::certify_psi(p, cb, ell, T, grid)), out);
        } else {
          emit(certificate_json(exb::certify_phi(cb, ell, dim, T, grid)), out);
        }
      } catch (const exb::CertificationFailure& e) {
        emit(failure_json(e), out);
        return kCertification;
      }
      return kOk;
    }
    if (*bcb) {
      const exb::EllipticityPair ell(lambda, Lambda);
      try {
        const auto b = exb::build_cone_barrier(theta0, ell, n, exb::barrier_kind_from_string(kind));
        std::ofstream os = open_out(out);
        os << exb::barrier_to_json(b) << '\n';
        std::printf("%s barrier: alpha = %.10g, eta = %.6g, mu_bound = %.6g\n", kind.c_str(), b.alpha(), b.eta(),
                    b.mu_bound());
      } catch (const exb::CertificationFailure& e) {
        std::cerr << "certification failed: " << e.what() << '\n';
        return kCertification;
      } catch (const exb::ConstructionFailure& e) {
        std::cerr << "construction failed: " << e.what() << '\n';
        return kCertification;
      }
      return kOk;
    }
    if (*cov) {
      exb::CantorSpec spec;
      spec.ratio = ratio;
      spec.level = level;
      const auto c = exb::build_cover(spec, mu, epsilon, nu);
      json j{{"ratio", ratio}, {"dimension", spec.dimension()}, {"mu", mu},        {"epsilon", epsilon},
             {"nu", nu},       {"level", c.level()},            {"count", c.count()}, {"radius", c.radius(0)},
             {"sum_power", c.sum_power()}};
      if (c.level() <= 12) {
        auto centers = json::array();
        for (std::uint64_t i = 0; i < c.count(); ++i) centers.push_back(c.center_param(i));
        j["centers"] = centers;
      }
      emit(j, out);
      std::printf("level %d, %llu balls of radius %.6g, sum %.6g\n", c.level(),
                  static_cast<unsigned long long>(c.count()), c.radius(0), c.sum_power());
      return kOk;
    }
    if (*sol) return run_solve(config, out);
    if (*exp) return run_experiment_cmd(which, config, out);
  } catch (const exb::CertificationFailure& e) {
    std::cerr << "certification failed: " << e.what() << '\n';
    return kCertification;
  } catch (const exb::ConstructionFailure& e) {
    std::cerr << "construction failed: " << e.what() << '\n';
    return kCertification;
  } catch (const exb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
