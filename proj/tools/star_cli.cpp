// Command-line front end: decompose, enhance, correct and weights over
// single images or directories of PNG/JPEG files.
//
// Exit codes: 0 success, 2 input or usage error, 3 computation error.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "star/star.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitCompute = 3;

enum class Mode { Decompose, Enhance, Correct, Weights };

struct CliConfig {
  Mode mode = Mode::Decompose;
  std::vector<std::string> inputs;
  std::string out_dir = ".";
  star::StarParams params;
  double gamma_e = 2.2;
  bool dump_raw = false;
  bool dump_trace = false;
  std::string truth;  // "r,g,b" ground-truth illuminant for correct
};

std::mutex g_print_mutex;

void print_lines(const std::string& block) {
  std::lock_guard<std::mutex> lock(g_print_mutex);
  std::cout << block << std::flush;
}

/// Expands files and directories into a sorted list of image paths.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

unsigned batch_threads(std::size_t jobs) {
  unsigned n = 0;
  if (const char* env = std::getenv("STAR_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 0) n = static_cast<unsigned>(parsed);
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(jobs, 1)));
}

std::string format_result(const std::string& stem, std::size_t iters,
                          double objective) {
  std::ostringstream line;
  line << "RESULT " << stem << " iters=" << iters << " objective=" << objective
       << '\n';
  return line.str();
}

void dump_decomposition_raw(const star::Decomposition& dec, const fs::path& dir,
                            const std::string& stem) {
  star::write_raw_grid(dec.illumination, (dir / (stem + "_I.starf32")).string());
  star::write_raw_grid(dec.reflectance, (dir / (stem + "_R.starf32")).string());
}

void dump_trace(const star::Decomposition& dec, const fs::path& dir,
                const std::string& stem) {
  std::ofstream out(dir / (stem + "_trace.csv"));
  if (!out) throw star::IoError("cannot write trace for " + stem);
  star::write_trace_csv(dec.trace, out);
}

int run_one_decompose(const CliConfig& cfg, const fs::path& input) {
  const std::string stem = input.stem().string();
  const fs::path dir(cfg.out_dir);
  const star::RgbImage img = star::load_image(input.string());
  const star::HsvImage hsv = star::rgb_to_hsv(img);
  const star::Decomposition dec = star::star_decompose(hsv.v, cfg.params);

  // display form: each component recombined with the original hue/saturation
  star::save_png((dir / (stem + "_I.png")).string(),
                 star::hsv_to_rgb(star::replace_value_channel(hsv, dec.illumination)));
  star::save_png((dir / (stem + "_R.png")).string(),
                 star::hsv_to_rgb(star::replace_value_channel(hsv, dec.reflectance)));
  if (cfg.dump_raw) dump_decomposition_raw(dec, dir, stem);
  if (cfg.dump_trace) dump_trace(dec, dir, stem);

  print_lines(stem + ": decomposed " + std::to_string(img.height()) + "x" +
              std::to_string(img.width()) + " in " +
              std::to_string(dec.trace.size()) + " inner iterations\n" +
              format_result(stem, dec.trace.size(), dec.trace.back().objective));
  return kExitOk;
}

int run_one_enhance(const CliConfig& cfg, const fs::path& input) {
  const std::string stem = input.stem().string();
  const fs::path dir(cfg.out_dir);
  const star::RgbImage img = star::load_image(input.string());
  const star::HsvImage hsv = star::rgb_to_hsv(img);
  const star::Decomposition dec = star::star_decompose(hsv.v, cfg.params);
  const star::ImageGrid enhanced = star::enhanced_value_channel(dec, cfg.gamma_e);
  const star::RgbImage out =
      star::hsv_to_rgb(star::replace_value_channel(hsv, enhanced));

  star::save_png((dir / (stem + "_enhanced.png")).string(), out);
  if (cfg.dump_raw) dump_decomposition_raw(dec, dir, stem);
  if (cfg.dump_trace) dump_trace(dec, dir, stem);

  print_lines(stem + ": enhanced with gamma_e=" + std::to_string(cfg.gamma_e) +
              "\n" +
              format_result(stem, dec.trace.size(), dec.trace.back().objective));
  return kExitOk;
}

int run_one_correct(const CliConfig& cfg, const fs::path& input,
                    const star::IlluminantEstimate* truth) {
  const std::string stem = input.stem().string();
  const fs::path dir(cfg.out_dir);
  const star::RgbImage img = star::load_image(input.string());

  // same computation as estimate_illuminant, kept inline for the trace
  const star::ImageGrid* planes[3] = {&img.r, &img.g, &img.b};
  double means[3];
  std::size_t iters = 0;
  double objective_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    double peak = 0.0;
    for (double x : planes[c]->data) peak = std::max(peak, x);
    if (peak == 0.0) {
      throw star::InvalidIlluminant("correct: channel " + std::to_string(c) +
                                    " of " + stem + " is all black");
    }
    const star::Decomposition dec = star::star_decompose(*planes[c], cfg.params);
    means[c] = star::mean_value(dec.illumination);
    iters += dec.trace.size();
    objective_sum += dec.trace.back().objective;
  }
  const star::IlluminantEstimate est{means[0], means[1], means[2]};
  star::save_png((dir / (stem + "_corrected.png")).string(),
                 star::color_correct(img, est));

  std::ostringstream block;
  char illum[96];
  std::snprintf(illum, sizeof(illum), "ILLUMINANT %.3f %.3f %.3f\n", est.r,
                est.g, est.b);
  block << stem << ": corrected\n" << illum;
  if (truth) {
    char err[64];
    std::snprintf(err, sizeof(err), "ANGULAR_ERROR %.6f\n",
                  star::angular_error(est, *truth));
    block << err;
  }
  block << format_result(stem, iters, objective_sum);
  print_lines(block.str());
  return kExitOk;
}

int run_one_weights(const CliConfig& cfg, const fs::path& input) {
  const std::string stem = input.stem().string();
  const fs::path dir(cfg.out_dir);
  const star::RgbImage img = star::load_image(input.string());
  const star::HsvImage hsv = star::rgb_to_hsv(img);

  star::ImageGrid init(hsv.v.height, hsv.v.width);
  for (std::size_t k = 0; k < init.size(); ++k) {
    init.data[k] = std::sqrt(hsv.v.data[k]);
  }
  const star::PlanePair s =
      star::build_weight(init, cfg.params.gamma_s, cfg.params.eps_weight,
                         cfg.params.window, cfg.params.weight_kind);
  const star::PlanePair t =
      star::build_weight(init, cfg.params.gamma_t, cfg.params.eps_weight,
                         cfg.params.window, cfg.params.weight_kind);
  star::write_raw_grid(s.x, (dir / (stem + "_Sx.starf32")).string());
  star::write_raw_grid(s.y, (dir / (stem + "_Sy.starf32")).string());
  star::write_raw_grid(t.x, (dir / (stem + "_Tx.starf32")).string());
  star::write_raw_grid(t.y, (dir / (stem + "_Ty.starf32")).string());

  print_lines(stem + ": wrote structure/texture weight maps\n" +
              format_result(stem, 0, 0.0));
  return kExitOk;
}

int classify_error(const std::exception& e) {
  if (dynamic_cast<const star::SolverFailure*>(&e) ||
      dynamic_cast<const star::SingularSystem*>(&e) ||
      dynamic_cast<const star::InvalidIlluminant*>(&e)) {
    return kExitCompute;
  }
  return kExitInput;
}

int run_batch(const CliConfig& cfg, const star::IlluminantEstimate* truth) {
  const std::vector<fs::path> files = expand_inputs(cfg.inputs);
  if (files.empty()) {
    std::cerr << "error: no input images found\n";
    return kExitInput;
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << cfg.out_dir << "\n";
    return kExitInput;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> status{kExitOk};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= files.size()) return;
      try {
        switch (cfg.mode) {
          case Mode::Decompose: run_one_decompose(cfg, files[idx]); break;
          case Mode::Enhance: run_one_enhance(cfg, files[idx]); break;
          case Mode::Correct: run_one_correct(cfg, files[idx], truth); break;
          case Mode::Weights: run_one_weights(cfg, files[idx]); break;
        }
      } catch (const std::exception& e) {
        {
          std::lock_guard<std::mutex> lock(g_print_mutex);
          std::cerr << "error: " << files[idx].string() << ": " << e.what()
                    << "\n";
        }
        int expected = status.load();
        const int mine = classify_error(e);
        while (mine > expected &&
               !status.compare_exchange_weak(expected, mine)) {
        }
      }
    }
  };

  const unsigned nthreads = batch_threads(files.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return status.load();
}

void add_param_flags(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("inputs", cfg.inputs, "input image files or directories")
      ->required();
  cmd->add_option("-o,--out-dir", cfg.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--alpha", cfg.params.alpha, "illumination regularization")
      ->capture_default_str();
  cmd->add_option("--beta", cfg.params.beta, "reflectance regularization")
      ->capture_default_str();
  cmd->add_option("--gamma-s", cfg.params.gamma_s, "structure exponent")
      ->capture_default_str();
  cmd->add_option("--gamma-t", cfg.params.gamma_t, "texture exponent")
      ->capture_default_str();
  cmd->add_option("--inner-iters", cfg.params.inner_iters,
                  "max alternating iterations per stage (K)")
      ->capture_default_str();
  cmd->add_option("--outer-iters", cfg.params.outer_iters,
                  "weight refresh stages (L)")
      ->capture_default_str();
  cmd->add_option("--eps-conv", cfg.params.eps_conv,
                  "relative-change stopping threshold")
      ->capture_default_str();
  cmd->add_option("--eps-weight", cfg.params.eps_weight,
                  "weight denominator stabilizer")
      ->capture_default_str();
  cmd->add_option("--eps-div", cfg.params.eps_div, "division stabilizer")
      ->capture_default_str();
  cmd->add_option("--radius", cfg.params.window.radius,
                  "half width of the local mean window")
      ->capture_default_str();
  cmd->add_option("--weight-kind", cfg.params.weight_kind,
                  "derivative filter behind the weights")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, star::WeightKind>{
              {"etv", star::WeightKind::Etv}, {"emlv", star::WeightKind::Emlv}},
          CLI::ignore_case))
      ->default_str("emlv");
  cmd->add_option("--cg-tol", cfg.params.solver.cg_tol,
                  "relative residual target of the CG solver")
      ->capture_default_str();
  cmd->add_option("--cg-max-iters", cfg.params.solver.cg_max_iters,
                  "CG iteration cap")
      ->capture_default_str();
  cmd->add_flag("--dump-raw", cfg.dump_raw,
                "also write I/R grids in the raw f32 format");
  cmd->add_flag("--dump-trace", cfg.dump_trace,
                "also write the convergence trace CSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structure/texture aware Retinex decomposition"};
  app.require_subcommand(1);

  CliConfig cfg;
  CLI::App* decompose =
      app.add_subcommand("decompose", "split images into illumination and reflectance");
  CLI::App* enhance = app.add_subcommand("enhance", "brighten low-light images");
  CLI::App* correct = app.add_subcommand("correct", "estimate and divide out the illuminant");
  CLI::App* weights = app.add_subcommand("weights", "dump the initial weight maps");
  for (CLI::App* cmd : {decompose, enhance, correct, weights}) {
    add_param_flags(cmd, cfg);
  }
  enhance->add_option("--gamma-e", cfg.gamma_e, "illumination gamma for recombination")
      ->capture_default_str();
  correct->add_option("--truth", cfg.truth,
                      "comma-separated ground-truth illuminant r,g,b");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (decompose->parsed()) cfg.mode = Mode::Decompose;
  if (enhance->parsed()) cfg.mode = Mode::Enhance;
  if (correct->parsed()) cfg.mode = Mode::Correct;
  if (weights->parsed()) cfg.mode = Mode::Weights;

  star::IlluminantEstimate truth;
  bool have_truth = false;
  if (cfg.mode == Mode::Correct && !cfg.truth.empty()) {
    std::istringstream in(cfg.truth);
    char comma1 = 0, comma2 = 0;
    if (!(in >> truth.r >> comma1 >> truth.g >> comma2 >> truth.b) ||
        comma1 != ',' || comma2 != ',' || truth.norm() == 0.0) {
      std::cerr << "error: --truth expects three comma-separated numbers\n";
      return kExitInput;
    }
    have_truth = true;
  }

  try {
    cfg.params.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  return run_batch(cfg, have_truth ? &truth : nullptr);
}
