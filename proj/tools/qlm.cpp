// qlm: quasi-local energy-momentum of a closed surface, from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "qlm/qlm.hpp"

namespace {

void add_common(CLI::App* sub, qlm::RunConfig& c) {
  sub->add_option("--input", c.input, "surface document (JSON)")->required();
  sub->add_option("--kappa", c.kappa, "hyperbolic curvature scale, K = -kappa^2")->capture_default_str();
  sub->add_option("--ntheta", c.ntheta, "grid rows (presets only)")->capture_default_str();
  sub->add_option("--npsi", c.npsi, "grid columns, even (presets only)")->capture_default_str();
  sub->add_option("--rmax", c.r_max, "last finite leaf, 0 for 8/kappa")->capture_default_str();
  sub->add_option("--steps", c.steps, "leaves between r = 0 and r = infinity")->capture_default_str();
  sub->add_option("--strategy", c.strategy, "embedding strategy")
      ->check(CLI::IsMember({"auto", "geodesic_sphere", "axisymmetric", "general"}))
      ->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "seed for the spinor and sampled checks")->capture_default_str();
  sub->add_option("--tol-defect", c.tol_defect, "isometry defect accepted as certified")->capture_default_str();
  sub->add_option("--tol-mono", c.tol_mono, "monotonicity tolerance")->capture_default_str();
  sub->add_option("--laplacian", c.laplacian_order, "Laplacian order for the flows (2 or 4)")
      ->check(CLI::IsMember({2, 4}))
      ->capture_default_str();
  sub->add_option("--sff-order", c.sff_order, "stencil order for the second fundamental form")
      ->check(CLI::IsMember({2, 4, 6, 8}))
      ->capture_default_str();
}

void write_admissibility(const qlm::RunConfig& c, const std::string& why) {
  qlm::KeyValueReport rep;
  rep.set("command", c.command);
  rep.set("input", c.input);
  rep.set("kappa", c.kappa);
  rep.set("status", "rejected");
  rep.set("reason", why);
  try {
    const auto spec = qlm::parse_surface_spec(qlm::load_json_file(c.input), qlm::SphereGrid(c.ntheta, c.npsi));
    const auto adm = qlm::check_admissibility(spec, c.kappa);
    rep.set("admissibility.min_K", adm.minK);
    rep.set("admissibility.kappa_floor", adm.kappa_floor);
    rep.set("admissibility.min_H_gap", adm.min_H_gap);
    rep.set("admissibility.pass", adm.pass);
  } catch (const std::exception&) {
  }
  std::cerr << rep.str();
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (!ec) rep.write((std::filesystem::path(c.out) / "report.txt").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-local energy-momentum via hyperbolic embedding and parabolic flows"};
  app.require_subcommand(1, 1);
  qlm::RunConfig cfg;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"embed", "isometric embedding into the hyperboloid"},
      {"foliate", "embedding plus the equidistant foliation"},
      {"solve-u", "solve the u flow"},
      {"solve-w", "solve the u and W flows"},
      {"mass", "mass profile and energy-momentum vector"},
      {"verify", "run the invariant battery; exit 1 on any failure"},
      {"report", "full run with every artifact"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), cfg);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 4;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec) throw qlm::InputError("cannot create output directory " + cfg.out);
    const qlm::RunResult res = qlm::run_pipeline(cfg);
    qlm::KeyValueReport rep = qlm::build_report(res);
    int status = 0;
    if (cfg.command == "verify") {
      const auto checks = qlm::verify_run(res);
      std::size_t failed = 0;
      for (const auto& c : checks) {
        rep.set("verify." + c.name, std::string(c.pass ? "pass " : "FAIL ") + qlm::fmt(c.value) +
                                        (c.note.empty() ? "" : " (" + c.note + ")"));
        std::printf("%-22s %s  %.3e%s%s\n", c.name.c_str(), c.pass ? "pass" : "FAIL", c.value,
                    c.note.empty() ? "" : "  ", c.note.c_str());
        if (!c.pass) ++failed;
      }
      rep.set("verify.failed", failed);
      status = failed ? 1 : 0;
    }
    rep.set("status", std::string(status ? "verify_failed" : "ok"));
    qlm::write_artifacts(res);
    rep.write((std::filesystem::path(cfg.out) / "report.txt").string());
    if (cfg.command != "verify") std::cout << rep.str();
    return status;
  } catch (const qlm::AdmissibilityError& e) {
    std::cerr << "qlm: not admissible: " << e.what() << '\n';
    write_admissibility(cfg, e.what());
    return 2;
  } catch (const qlm::SolverError& e) {
    std::cerr << "qlm: solver failure: " << e.what() << '\n';
    return 3;
  } catch (const qlm::InputError& e) {
    std::cerr << "qlm: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "qlm: " << e.what() << '\n';
    return 4;
  }
}
