#include "mtfe/experiments.hpp"
#include "mtfe/vtk.hpp"

#include "CLI11.hpp"

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace mtfe;

// Unstructured-looking test bed: one bisection sweep (2D) plus an interior
// vertex shake so no cell is axis-aligned.
Mesh certification_mesh(int dim) {
  if (dim == 2) {
    Mesh m = build_structured_2d(3, Vec3(0, 0, 0), Vec3(1, 1, 0));
    std::vector<Index> all(static_cast<std::size_t>(m.n_cells()));
    std::iota(all.begin(), all.end(), Index{0});
    m = refine_nvb(m, all);
    return perturb_interior(m, 0.15, 7u);
  }
  Mesh m = build_structured_3d(2, Vec3(0, 0, 0), Vec3(1, 1, 1));
  return perturb_interior(m, 0.1, 7u);
}

int run_verify(const std::vector<std::string>& tags) {
  int failures = 0;
  auto report = [&failures](const std::string& family, const char* what,
                            double value, double tol) {
    const bool ok = value <= tol;
    if (!ok) ++failures;
    std::printf("%s  %-6s  %-28s %9.3e  (tol %7.1e)\n", ok ? "PASS" : "FAIL",
                family.c_str(), what, value, tol);
  };

  for (const std::string& tag : tags) {
    const ElementSpec spec = parse_family(tag);
    const Mesh mesh = certification_mesh(spec.dim());

    double resid = 0.0, rcond = 1.0;
    for (Index c = 0; c < mesh.n_cells(); ++c) {
      const NodalBasis nb = nodal_basis(spec, mesh, c);
      const Eigen::MatrixXd d = dof_matrix(spec, mesh, c);
      const Eigen::MatrixXd gram = d * nb.coeff;
      const int n = n_dofs(spec);
      resid = std::max(
          resid,
          (gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
      rcond = std::min(rcond, nb.rcond);
    }
    report(tag, "unisolvence residual", resid, 1e-8);
    report(tag, "dof matrix condition", 1.0 / rcond, 1e10);

    const FeSpace space = build_space(mesh, spec, BcKind::DirichletH10);
    const FeSpace broken =
        build_space(mesh, spec, BcKind::DirichletH10, SpaceMode::Relaxed);
    std::mt19937 rng(42);
    std::normal_distribution<double> gauss;
    const int n_samples = spec.dim() == 2 ? 20 : 6;

    double jump = 0.0, defect = 0.0, closure = 0.0, face_mag = 0.0;
    for (int k = 0; k < n_samples; ++k) {
      Eigen::VectorXd x(space.n_free);
      for (Index i = 0; i < x.size(); ++i) x[i] = gauss(rng);
      jump = std::max(jump, check_jump_moments(space, x));
      const MtIdentity id = check_mt_identity(space, x);
      defect = std::max(defect, std::abs(id.lap_sq - id.hess_sq) / id.lap_sq);

      Eigen::VectorXd y(broken.n_free);
      for (Index i = 0; i < y.size(); ++i) y[i] = gauss(rng);
      const MtIdentity br = check_mt_identity(broken, y);
      closure = std::max(
          closure, std::abs(br.lap_sq - br.hess_sq - br.face_sum) /
                       (br.lap_sq + std::abs(br.face_sum)));
      face_mag = std::max(face_mag, std::abs(br.face_sum) / br.lap_sq);
    }
    report(tag, "normal jump moments", jump, 1e-10);
    report(tag, "miranda-talenti defect", defect, 1e-10);
    report(tag, "broken identity closure", closure, 1e-9);
    if (face_mag <= 1e-10) {
      // the relaxed space must actually decouple the facet moments
      report(tag, "relaxed face term present", face_mag, 1e-10);
      ++failures;
    }
  }
  std::printf("%s: %d check%s failed\n", failures == 0 ? "OK" : "FAILED",
              failures, failures == 1 ? "" : "s");
  return failures;
}

std::string csv_path(const std::string& out_dir,
                     const ConvergenceRecord& record) {
  return out_dir + "/" + record.experiment + "-" + record.family + ".csv";
}

int emit_record(const ConvergenceRecord& record, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path = csv_path(out_dir, record);
  std::ofstream file(path);
  if (!file) {
    std::fprintf(stderr, "error: cannot open %s\n", path.c_str());
    return 2;
  }
  write_csv(record, file);
  write_csv(record, std::cout);
  std::printf("wrote %s\n", path.c_str());
  for (const LevelRecord& lr : record.levels)
    if (!lr.solved) {
      std::fprintf(stderr, "error: level %d did not solve\n", lr.level);
      return 1;
    }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convergence benchmarks for H2-nonconforming elements"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");

  std::string out_dir = "out";
  int quad_degree = -1;
  std::string solver = "direct";
  app.add_option("--out", out_dir, "Directory for CSV and VTK outputs")
      ->capture_default_str();
  app.add_option("--quad-degree", quad_degree,
                 "Assembly quadrature degree (-1: element default)")
      ->capture_default_str();
  app.add_option("--solver", solver, "Linear solver backend")
      ->check(CLI::IsMember({"direct", "iterative"}))
      ->capture_default_str();

  CLI::App* list = app.add_subcommand("list", "List registered experiments");

  CLI::App* verify = app.add_subcommand(
      "verify", "Certify unisolvence, dof continuity and the integration\n"
                "identity on perturbed meshes (exit code = failed checks)");
  std::vector<std::string> families{"specht", "tri3", "tri4",
                                    "tri6",   "tet5", "tet6"};
  verify->add_option("--family", families, "Element families to certify")
      ->capture_default_str();

  CLI::App* conv =
      app.add_subcommand("convergence", "Uniform-refinement study");
  std::string conv_name;
  int levels = 4;
  std::string family_override;
  conv->add_option("experiment", conv_name, "Registered experiment name")
      ->required();
  conv->add_option("--levels", levels, "Refinement levels")
      ->check(CLI::Range(2, 12))
      ->capture_default_str();
  conv->add_option("--family", family_override, "Element family override");

  CLI::App* adap =
      app.add_subcommand("adaptive", "Residual-driven adaptive study");
  std::string adap_name;
  double theta = 0.5;
  std::int64_t budget = 20000;
  bool vtk_snapshots = false;
  adap->add_option("experiment", adap_name, "Registered experiment name")
      ->required();
  adap->add_option("--theta", theta, "Doerfler marking fraction")
      ->capture_default_str();
  adap->add_option("--budget", budget, "Free-dof stopping threshold")
      ->capture_default_str();
  adap->add_flag("--vtk", vtk_snapshots, "Write a snapshot per iteration");

  CLI11_PARSE(app, argc, argv);

  try {
    RunOptions opts;
    opts.quad_degree = quad_degree;
    opts.solver.iterative = (solver == "iterative");

    if (list->parsed()) {
      for (const Experiment& ex : experiment_registry())
        std::printf("%-24s %-7s %s\n", ex.name.c_str(),
                    family_tag(ex.element).c_str(), ex.description.c_str());
      return 0;
    }
    if (verify->parsed()) return run_verify(families);
    if (conv->parsed()) {
      if (!family_override.empty()) opts.element = parse_family(family_override);
      const ConvergenceRecord record =
          run_convergence(find_experiment(conv_name), levels, opts);
      return emit_record(record, out_dir);
    }
    if (adap->parsed()) {
      if (vtk_snapshots) {
        std::filesystem::create_directories(out_dir);
        opts.vtk_dir = out_dir;
      }
      const ConvergenceRecord record = run_adaptive(
          find_experiment(adap_name), theta,
          static_cast<Index>(budget), opts);
      const int rc = emit_record(record, out_dir);
      if (rc == 0 && record.levels.size() > 2)
        std::printf("tail slope of log(eH2) vs log(ndof): %.3f\n",
                    tail_slope(record));
      return rc;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
