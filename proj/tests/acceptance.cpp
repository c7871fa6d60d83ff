// Acceptance suite: runs every release gate at its stated tolerance and
// prints one PASS/FAIL line per gate. Exits nonzero if any gate fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "star/oracle.hpp"
#include "star/star.hpp"
#include "synthetic_corpus.hpp"

namespace fs = std::filesystem;
using namespace star;

namespace {

struct Gate {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

struct CorpusRun {
  Decomposition emlv;
  Decomposition etv;
  double seconds = 0.0;
};

std::vector<double> random_vec(std::size_t n, std::mt19937& rng, double lo,
                               double hi) {
  std::uniform_real_distribution<double> uni(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = uni(rng);
  return v;
}

oracle::SubproblemInstance random_instance(int h, int w, std::mt19937& rng) {
  oracle::SubproblemInstance inst;
  inst.op = GradientOperator{h, w};
  const std::size_t n = inst.op.size();
  inst.observation = random_vec(n, rng, 0.05, 1.0);
  inst.fixed_factor = random_vec(n, rng, 0.2, 1.5);
  inst.reg_x = random_vec(n, rng, 0.1, 3.0);
  inst.reg_y = random_vec(n, rng, 0.1, 3.0);
  std::uniform_real_distribution<double> lam(0.05, 1.0);
  inst.lambda = lam(rng);
  return inst;
}

// ---------------------------------------------------------------------------
// 1. inner-loop convergence on the corpus, under the runtime budget

Gate criterion_convergence(std::vector<CorpusRun>& runs) {
  Gate gate;
  const StarParams defaults;
  for (int idx = 0; idx < corpus::scene_count(); ++idx) {
    const RgbImage img = corpus::make_scene(idx);
    const HsvImage hsv = rgb_to_hsv(img);

    const auto t0 = std::chrono::steady_clock::now();
    CorpusRun run;
    run.emlv = star_decompose(hsv.v, defaults);
    run.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();

    // the TV-weighted ablation drops the exponents: its weights are the
    // plain reciprocal gradients 1/(|grad|+eps) on both components
    StarParams etv = defaults;
    etv.weight_kind = WeightKind::Etv;
    etv.gamma_s = 1.0;
    etv.gamma_t = 1.0;
    run.etv = star_decompose(hsv.v, etv);

    // the first stage is the plain inner loop from the standard start
    std::size_t stage0 = 0;
    for (const IterationRecord& rec : run.emlv.trace) {
      stage0 += (rec.outer == 0);
    }
    const IterationRecord* last0 = nullptr;
    for (const IterationRecord& rec : run.emlv.trace) {
      if (rec.outer == 0) last0 = &rec;
    }
    const double best_rel =
        last0 ? std::min(last0->rel_change_i, last0->rel_change_r) : 1.0;
    if (stage0 > 10 || best_rel >= 0.01) {
      gate.fail("scene " + std::to_string(idx) + " needed " +
                std::to_string(stage0) + " iterations (rel " +
                std::to_string(best_rel) + ")");
    }
    if (stage0 > 20) gate.fail("scene " + std::to_string(idx) + " broke the hard cap");
    if (run.seconds >= 30.0) {
      gate.fail("scene " + std::to_string(idx) + " took " +
                std::to_string(run.seconds) + " s");
    }
    runs.push_back(std::move(run));
  }
  return gate;
}

// ---------------------------------------------------------------------------
// 2. objective monotonicity inside every stage of every corpus run

Gate criterion_monotonicity(const std::vector<CorpusRun>& runs) {
  Gate gate;
  int checked = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const Decomposition* dec : {&runs[r].emlv, &runs[r].etv}) {
      for (std::size_t k = 1; k < dec->trace.size(); ++k) {
        if (dec->trace[k].outer != dec->trace[k - 1].outer) continue;
        ++checked;
        const double prev = dec->trace[k - 1].objective;
        const double cur = dec->trace[k].objective;
        if (cur > prev * (1.0 + 1e-6) + 1e-15) {
          gate.fail("scene " + std::to_string(r) + " stage " +
                    std::to_string(dec->trace[k].outer) + " rose from " +
                    std::to_string(prev) + " to " + std::to_string(cur));
        }
      }
    }
  }
  if (checked == 0) gate.fail("no consecutive iterations to compare");
  return gate;
}

// ---------------------------------------------------------------------------
// 3. oracle equivalence on 200 random instances

Gate criterion_oracles() {
  Gate gate;
  std::mt19937 rng(20240901);
  double worst_dense = 0.0, worst_descent = 0.0, worst_probe = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int h = 2 + t % 5;
    const int w = 2 + (t / 5) % 5;
    const oracle::SubproblemInstance inst = random_instance(h, w, rng);
    const DiagonalWeights weights = inst.diagonals();

    SolverSettings tight;  // route agreement, so run CG well past 1e-6
    tight.cg_tol = 1e-10;
    const std::vector<double> x_cg =
        solve_subproblem(inst.op, weights, inst.fixed_factor, inst.observation,
                         inst.lambda, tight);

    const oracle::DenseSystem sys = oracle::assemble_dense(
        inst.op, weights, inst.fixed_factor, inst.observation, inst.lambda);
    const std::vector<double> x_dense = oracle::dense_solve(sys);
    const std::vector<double> x_gd =
        inst.minimize_by_descent(std::vector<double>(inst.op.size(), 0.0));

    for (std::size_t i = 0; i < x_cg.size(); ++i) {
      worst_dense = std::max(worst_dense, std::fabs(x_cg[i] - x_dense[i]));
      worst_descent = std::max(worst_descent, std::fabs(x_cg[i] - x_gd[i]));
    }

    std::vector<double> e(inst.op.size(), 0.0);
    for (std::size_t j = 0; j < inst.op.size(); ++j) {
      e[j] = 1.0;
      const std::vector<double> col =
          apply_normal(inst.op, weights, inst.lambda, e);
      e[j] = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) {
        worst_probe = std::max(
            worst_probe,
            std::fabs(sys.at(static_cast<int>(i), static_cast<int>(j)) - col[i]));
      }
    }
  }
  std::ostringstream detail;
  detail << "max |cg-dense| " << worst_dense << ", |cg-descent| "
         << worst_descent << ", |dense-probe| " << worst_probe;
  if (worst_dense > 1e-6) gate.fail("cg vs dense above 1e-6");
  if (worst_descent > 1e-4) gate.fail("cg vs descent above 1e-4");
  if (worst_probe > 1e-12) gate.fail("dense vs probe above 1e-12");
  if (gate.pass) gate.detail = detail.str();
  return gate;
}

// ---------------------------------------------------------------------------
// 4. analytic gradients against central finite differences

Gate criterion_gradients() {
  Gate gate;
  std::mt19937 rng(424242);
  const double h = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const oracle::SubproblemInstance inst = random_instance(3, 3, rng);
    std::vector<double> x = random_vec(9, rng, 0.0, 1.0);
    const std::vector<double> g = inst.gradient(x);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::fabs(v));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double plus = inst.value(x);
      x[i] = keep - h;
      const double minus = inst.value(x);
      x[i] = keep;
      const double fd = (plus - minus) / (2 * h);
      worst = std::max(worst, std::fabs(fd - g[i]) / std::max(gmax, 1e-12));
    }
  }
  gate.detail = "max relative gradient error " + std::to_string(worst);
  if (worst > 1e-5) gate.fail("gradient mismatch above 1e-5");
  return gate;
}

// ---------------------------------------------------------------------------
// 5. constant fixed point at every outer stage

Gate criterion_fixed_point() {
  Gate gate;
  for (double c : {0.04, 0.25, 0.64, 1.0}) {
    for (int stages = 1; stages <= 4; ++stages) {
      StarParams p;
      p.outer_iters = stages;
      const Decomposition dec = star_decompose(ImageGrid(16, 16, c), p);
      const double root = std::sqrt(c);
      for (double v : dec.illumination.data) {
        if (std::fabs(v - root) > 1e-8) {
          gate.fail("illumination drifted at c=" + std::to_string(c));
          break;
        }
      }
      for (double v : dec.reflectance.data) {
        if (std::fabs(v - root) > 1e-8) {
          gate.fail("reflectance drifted at c=" + std::to_string(c));
          break;
        }
      }
    }
  }
  return gate;
}

// ---------------------------------------------------------------------------
// 6. hsv round trip over a million quantized triples

Gate criterion_hsv_roundtrip() {
  Gate gate;
  std::mt19937 rng(777);
  std::uniform_int_distribution<int> byte(0, 255);
  const int n = 1000000;
  RgbImage img;
  img.r = ImageGrid(1, n);
  img.g = ImageGrid(1, n);
  img.b = ImageGrid(1, n);
  for (int i = 0; i < n; ++i) {
    img.r.data[i] = byte(rng) / 255.0;
    img.g.data[i] = byte(rng) / 255.0;
    img.b.data[i] = byte(rng) / 255.0;
  }
  const RgbImage back = hsv_to_rgb(rgb_to_hsv(img));
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    worst = std::max(worst, std::fabs(back.r.data[i] - img.r.data[i]));
    worst = std::max(worst, std::fabs(back.g.data[i] - img.g.data[i]));
    worst = std::max(worst, std::fabs(back.b.data[i] - img.b.data[i]));
  }
  gate.detail = "max channel error " + std::to_string(worst);
  if (worst > 1.0 / 255.0) gate.fail("round trip error above 1/255");
  return gate;
}

// ---------------------------------------------------------------------------
// 7. weighting-scheme ablation direction on the corpus

Gate criterion_ablation(const std::vector<CorpusRun>& runs) {
  Gate gate;
  double tv_r_emlv = 0.0, tv_r_etv = 0.0;
  for (std::size_t idx = 0; idx < runs.size(); ++idx) {
    tv_r_emlv += corpus::total_variation(runs[idx].emlv.reflectance);
    tv_r_etv += corpus::total_variation(runs[idx].etv.reflectance);
    const double tv_i = corpus::total_variation(runs[idx].emlv.illumination);
    const double tv_r = corpus::total_variation(runs[idx].emlv.reflectance);
    if (!(tv_i < tv_r)) {
      gate.fail("scene " + std::to_string(idx) + ": TV(I) " +
                std::to_string(tv_i) + " !< TV(R) " + std::to_string(tv_r));
    }
  }
  tv_r_emlv /= static_cast<double>(runs.size());
  tv_r_etv /= static_cast<double>(runs.size());
  std::ostringstream detail;
  detail << "mean TV(R): emlv " << tv_r_emlv << ", etv " << tv_r_etv;
  if (!(tv_r_emlv >= tv_r_etv)) {
    gate.fail("emlv reflectance lost texture: " + detail.str());
  }
  if (gate.pass) gate.detail = detail.str();
  return gate;
}

// ---------------------------------------------------------------------------
// 8. synthetic-tint color constancy beats the do-nothing estimate

Gate criterion_color_constancy() {
  Gate gate;
  std::mt19937 rng(99991);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const IlluminantEstimate neutral{1.0, 1.0, 1.0};
  int wins = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    // tint direction: rotate the neutral axis by theta in [5, 25] degrees
    const double theta = (5.0 + 20.0 * uni(rng)) * std::numbers::pi / 180.0;
    const double phi = 2.0 * std::numbers::pi * uni(rng);
    // orthonormal basis of the plane orthogonal to (1,1,1)/sqrt(3)
    const double u1[3] = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0};
    const double u2[3] = {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0),
                          -2.0 / std::sqrt(6.0)};
    double e[3];
    for (int c = 0; c < 3; ++c) {
      e[c] = std::cos(theta) / std::sqrt(3.0) +
             std::sin(theta) * (std::cos(phi) * u1[c] + std::sin(phi) * u2[c]);
    }
    const double peak = std::max({e[0], e[1], e[2]});
    const IlluminantEstimate truth{e[0], e[1], e[2]};

    const RgbImage scene = corpus::tinted_neutral_scene(
        0xC0FFEE + t, 32, 32, 0.95 * e[0] / peak, 0.95 * e[1] / peak,
        0.95 * e[2] / peak);
    const IlluminantEstimate est = estimate_illuminant(scene, StarParams{});
    const double err_est = angular_error(est, truth);
    const double err_nothing = angular_error(neutral, truth);
    wins += (err_est < err_nothing);
  }
  gate.detail = std::to_string(wins) + "/" + std::to_string(trials) +
                " tints improved";
  if (wins * 10 < trials * 9) gate.fail("below the 90% win rate");
  return gate;
}

// ---------------------------------------------------------------------------
// 9. enhancement direction and identity gamma

Gate criterion_enhancement() {
  Gate gate;
  const StarParams p;
  for (int t = 0; t < 3; ++t) {
    const RgbImage dark =
        corpus::dark_textured_scene(0xDA12 + t, 48, 48, 0.06 + 0.03 * t);
    const double before = mean_value(rgb_to_hsv(dark).v);
    const RgbImage bright = enhance_lowlight(dark, p, 2.2);
    const double after = mean_value(rgb_to_hsv(bright).v);
    if (!(after > before)) {
      gate.fail("scene " + std::to_string(t) + " did not brighten (" +
                std::to_string(before) + " -> " + std::to_string(after) + ")");
    }

    const RgbImage same = enhance_lowlight(dark, p, 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < dark.r.size(); ++k) {
      worst = std::max(worst, std::fabs(same.r.data[k] - dark.r.data[k]));
      worst = std::max(worst, std::fabs(same.g.data[k] - dark.g.data[k]));
      worst = std::max(worst, std::fabs(same.b.data[k] - dark.b.data[k]));
    }
    if (worst > 1e-2) {
      gate.fail("gamma_e=1 reconstruction error " + std::to_string(worst));
    }
  }
  return gate;
}

// ---------------------------------------------------------------------------
// 10. bit-identical raw dumps from two CLI runs

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Gate criterion_determinism(const char* cli_path) {
  Gate gate;
  const fs::path dir = fs::temp_directory_path() / "star_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path input = dir / "scene.png";
  save_png(input.string(), corpus::make_scene(3));

  for (const char* sub : {"a", "b"}) {
    const std::string cmd = std::string(cli_path) + " decompose \"" +
                            input.string() + "\" --dump-raw -o \"" +
                            (dir / sub).string() + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      gate.fail("cli run failed");
      return gate;
    }
  }
  for (const char* name : {"scene_I.starf32", "scene_R.starf32"}) {
    const std::string a = slurp(dir / "a" / name);
    const std::string b = slurp(dir / "b" / name);
    if (a.empty() || a != b) gate.fail(std::string(name) + " differs or missing");
  }
  return gate;
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli_path = argc > 1 ? argv[1] : STAR_CLI_PATH;

  std::vector<CorpusRun> runs;
  struct Entry {
    int id;
    const char* name;
    Gate gate;
  };
  std::vector<Entry> entries;

  entries.push_back({1, "corpus convergence within 10 inner iterations, < 30 s/image",
                     criterion_convergence(runs)});
  entries.push_back({2, "objective non-increasing within every stage",
                     criterion_monotonicity(runs)});
  entries.push_back({3, "CG / dense / descent oracle agreement", criterion_oracles()});
  entries.push_back({4, "analytic gradient matches finite differences",
                     criterion_gradients()});
  entries.push_back({5, "constant image fixed point at every stage",
                     criterion_fixed_point()});
  entries.push_back({6, "hsv round trip within 1/255 over 1e6 triples",
                     criterion_hsv_roundtrip()});
  entries.push_back({7, "weight-scheme ablation direction", criterion_ablation(runs)});
  entries.push_back({8, "synthetic-tint color constancy win rate >= 90%",
                     criterion_color_constancy()});
  entries.push_back({9, "enhancement brightens; unit gamma reconstructs",
                     criterion_enhancement()});
  entries.push_back({10, "bit-identical raw dumps across CLI runs",
                     criterion_determinism(cli_path)});

  int failures = 0;
  for (const Entry& e : entries) {
    std::printf("[%s] criterion %2d: %s%s%s\n", e.gate.pass ? "PASS" : "FAIL",
                e.id, e.name, e.gate.detail.empty() ? "" : " — ",
                e.gate.detail.c_str());
    failures += !e.gate.pass;
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, entries.size());
  } else {
    std::printf("all %zu criteria passed\n", entries.size());
  }
  return failures;
}
