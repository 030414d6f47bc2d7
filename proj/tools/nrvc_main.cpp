// Command-line front end: encode / decode / metrics / eval-dwi / phantom.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nrvc/codec.hpp"
#include "nrvc/dwi.hpp"
#include "nrvc/metrics.hpp"
#include "nrvc/nifti.hpp"
#include "nrvc/training.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit-code taxonomy: usage 2, format 3, divergence 4, corruption 5.
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitCorruption = 5;

using nlohmann::json;

std::string file_crc32(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw nrvc::IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  std::ostringstream hex;
  hex << std::hex << nrvc::crc32_bytes(bytes.data(), bytes.size());
  return hex.str();
}

struct ManifestWriter {
  json doc;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  explicit ManifestWriter(const std::string& command) {
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["config"] = json::object();
    doc["input_hashes"] = json::object();
    doc["outputs"] = json::array();
  }
  void input(const std::string& path) { doc["input_hashes"][path] = file_crc32(path); }
  void output(const std::string& path) { doc["outputs"].push_back(path); }
  void write(const std::string& path) {
    doc["wall_time_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::ofstream f(path);
    f << doc.dump(2) << "\n";
  }
};

int default_jobs() {
  if (const char* env = std::getenv("NRVC_JOBS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Zeroes samples outside the tissue mask; the zeros then compress well and
// the fit no longer spends capacity on background.
void apply_mask(nrvc::Volume4D& v, const nrvc::TissueMask& mask) {
  if (mask.nx != v.nx || mask.ny != v.ny || mask.nz != v.nz)
    throw nrvc::ShapeError("mask dims do not match volume");
  for (int m = 0; m < v.m; ++m)
    for (int z = 0; z < v.nz; ++z)
      for (int y = 0; y < v.ny; ++y)
        for (int x = 0; x < v.nx; ++x)
          if (mask.at(x, y, z) == nrvc::TissueLabel::Background)
            v.at(x, y, z, m) = 0.0f;
}

int run_encode(const std::string& input, const std::string& output,
               const std::string& mode_name, int layers, int units,
               const std::string& variant, int epochs, double lr,
               double omega0, const std::string& quant, uint64_t seed,
               const std::string& mask_path, int jobs) {
  ManifestWriter manifest("encode");
  manifest.input(input);
  if (!mask_path.empty()) manifest.input(mask_path);

  const nrvc::GridMode mode =
      mode_name == "3d" ? nrvc::GridMode::Volume3D : nrvc::GridMode::Slice2D;
  if (lr <= 0.0) lr = mode == nrvc::GridMode::Volume3D ? 2e-4 : 3e-4;

  nrvc::Volume4D native = nrvc::read_nifti(input);
  if (!mask_path.empty()) apply_mask(native, nrvc::read_mask(mask_path));
  nrvc::Volume4D normed = nrvc::normalize(native);

  nrvc::NetworkSpec spec;
  spec.in_dim = mode == nrvc::GridMode::Volume3D ? 3 : 2;
  spec.out_dim = native.m;
  spec.hidden_layers = layers;
  spec.hidden_units = units;
  spec.variant = nrvc::variant_from_name(variant);
  spec.omega0 = omega0;
  spec.validate();

  nrvc::TrainConfig config;
  config.epochs = epochs;
  config.learning_rate = lr;
  config.seed = seed;
  config.loss_log_stride = std::max(1, epochs / 100);
  config.validate();

  nrvc::EncodeResult enc =
      nrvc::encode_volume(normed, spec, config, mode, jobs);

  nrvc::ContainerMeta meta;
  meta.mode = mode;
  meta.spec = spec;
  meta.dims = {static_cast<uint32_t>(native.nx), static_cast<uint32_t>(native.ny),
               static_cast<uint32_t>(native.nz), static_cast<uint32_t>(native.m)};
  meta.voxel_size = native.voxel_size;
  meta.norm_min = normed.norm_min;
  meta.norm_max = normed.norm_max;
  meta.quant = nrvc::quant_from_name(quant);
  meta.seed = seed;

  nrvc::CompressedArtifact artifact = nrvc::pack(enc.networks, meta);
  nrvc::write_artifact(artifact, output);

  const std::string trace_path = output + ".trace.csv";
  nrvc::write_trace_csv(enc.traces, trace_path);

  // Final PSNR from an actual decode, so quantization drift is included.
  nrvc::Volume4D decoded = nrvc::decode(artifact);
  const double range = normed.norm_max - normed.norm_min;
  nrvc::Volume4D decoded_normed = decoded;
  for (float& s : decoded_normed.data)
    s = static_cast<float>((s - normed.norm_min) / (range > 0 ? range : 1.0));
  const double final_psnr =
      nrvc::psnr(nrvc::mse_volumes(normed, decoded_normed));
  const double ratio = nrvc::compression_ratio(
      nrvc::nifti_uncompressed_size(native), artifact.byte_size());

  std::cout << "psnr_db " << final_psnr << "\n";
  std::cout << "compression_ratio " << ratio << "\n";

  manifest.doc["config"] = {
      {"mode", mode_name},   {"layers", layers}, {"units", units},
      {"variant", variant},  {"epochs", epochs}, {"lr", lr},
      {"omega0", omega0},    {"quant", quant},   {"mask", mask_path},
      {"jobs", jobs},
  };
  manifest.doc["seed"] = seed;
  manifest.output(output);
  manifest.output(trace_path);
  manifest.write(output + ".manifest.json");
  return 0;
}

int run_decode(const std::string& input, const std::string& output) {
  ManifestWriter manifest("decode");
  manifest.input(input);
  nrvc::Volume4D v = nrvc::decode(nrvc::read_artifact(input));
  nrvc::write_nifti(v, output);
  manifest.output(output);
  manifest.write(output + ".manifest.json");
  return 0;
}

int run_metrics(const std::string& truth_path, const std::string& test_path,
                const std::string& mask_path, const std::string& json_path,
                const std::string& csv_path) {
  ManifestWriter manifest("metrics");
  manifest.input(truth_path);
  manifest.input(test_path);
  if (!mask_path.empty()) manifest.input(mask_path);

  nrvc::Volume4D truth = nrvc::read_nifti(truth_path);
  nrvc::Volume4D test = nrvc::read_nifti(test_path);
  std::optional<nrvc::TissueMask> mask;
  if (!mask_path.empty()) mask = nrvc::read_mask(mask_path);

  nrvc::MetricsReport report =
      nrvc::compute_metrics(truth, test, mask ? &*mask : nullptr);
  const std::string report_json = nrvc::report_to_json(report);
  if (json_path.empty()) {
    std::cout << report_json << "\n";
  } else {
    std::ofstream(json_path) << report_json << "\n";
    manifest.output(json_path);
  }
  if (!csv_path.empty()) {
    std::ofstream(csv_path) << nrvc::report_to_csv(report);
    manifest.output(csv_path);
  }
  manifest.doc["seed"] = 0;
  manifest.write((json_path.empty() ? test_path : json_path) +
                 ".manifest.json");
  return 0;
}

// Sub-volume of the b=0 rows plus one shell, used by the tensor fit.
std::pair<nrvc::Volume4D, nrvc::GradientTable> select_b0_and_shell(
    const nrvc::Volume4D& v, const nrvc::GradientTable& g, double b,
    double tol = 50.0) {
  std::vector<int> keep;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.b_values[i] <= tol || std::abs(g.b_values[i] - b) <= tol)
      keep.push_back(static_cast<int>(i));
  nrvc::Volume4D out = v;
  out.m = static_cast<int>(keep.size());
  out.data.resize(out.sample_count());
  nrvc::GradientTable table;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    table.b_values.push_back(g.b_values[keep[j]]);
    table.directions.push_back(g.directions[keep[j]]);
    for (int z = 0; z < v.nz; ++z)
      for (int y = 0; y < v.ny; ++y)
        for (int x = 0; x < v.nx; ++x)
          out.at(x, y, z, static_cast<int>(j)) = v.at(x, y, z, keep[j]);
  }
  return {out, table};
}

struct LabeledStats {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
};

// Signed relative error (%) of a scalar map, summarized per mask label.
std::vector<LabeledStats> scalar_rel_error(const std::vector<double>& truth,
                                           const std::vector<double>& test,
                                           const nrvc::TissueMask* mask,
                                           double floor = 1e-6) {
  std::vector<double> rel(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    rel[i] = 100.0 * (test[i] - truth[i]) / std::max(std::abs(truth[i]), floor);

  std::vector<LabeledStats> out;
  if (mask) {
    for (nrvc::TissueLabel label : {nrvc::TissueLabel::WM, nrvc::TissueLabel::GM,
                                    nrvc::TissueLabel::CSF}) {
      try {
        auto [mean, sd] = nrvc::masked_stats(rel, *mask, label);
        out.push_back({nrvc::tissue_label_name(label), mean, sd});
      } catch (const nrvc::EmptySelectionError&) {
      }
    }
  } else {
    double mean = 0.0;
    for (double r : rel) mean += r;
    mean /= static_cast<double>(rel.size());
    double var = 0.0;
    for (double r : rel) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rel.size());
    out.push_back({"all", mean, std::sqrt(var)});
  }
  return out;
}

int run_eval_dwi(const std::string& truth_path, const std::string& test_path,
                 const std::string& bvals_path, const std::string& bvecs_path,
                 const std::string& mask_path, double b_tensor, double b_sh,
                 const std::string& csv_path) {
  ManifestWriter manifest("eval-dwi");
  for (const auto& p : {truth_path, test_path, bvals_path, bvecs_path})
    manifest.input(p);
  if (!mask_path.empty()) manifest.input(mask_path);

  nrvc::Volume4D truth = nrvc::read_nifti(truth_path);
  nrvc::Volume4D test = nrvc::read_nifti(test_path);
  nrvc::GradientTable table =
      nrvc::read_gradient_table(bvals_path, bvecs_path);
  std::optional<nrvc::TissueMask> mask;
  if (!mask_path.empty()) mask = nrvc::read_mask(mask_path);
  const nrvc::TissueMask* mask_ptr = mask ? &*mask : nullptr;

  std::ostringstream csv;
  csv << "metric,label,mean_percent,std_percent\n";
  auto emit = [&](const std::string& metric,
                  const std::vector<LabeledStats>& rows) {
    for (const auto& row : rows)
      csv << metric << "," << row.label << "," << row.mean << "," << row.sd
          << "\n";
  };

  {
    auto [tv, tg] = select_b0_and_shell(truth, table, b_tensor);
    auto [sv, sg] = select_b0_and_shell(test, table, b_tensor);
    nrvc::TensorField truth_fit = nrvc::fit_tensor_volume(tv, tg);
    nrvc::TensorField test_fit = nrvc::fit_tensor_volume(sv, sg);
    emit("MD", scalar_rel_error(nrvc::md_map(truth_fit),
                                nrvc::md_map(test_fit), mask_ptr));
    emit("FA", scalar_rel_error(nrvc::fa_map(truth_fit),
                                nrvc::fa_map(test_fit), mask_ptr));
  }
  {
    auto [tv, tg] = nrvc::select_shell(truth, table, b_sh, 50.0);
    auto [sv, sg] = nrvc::select_shell(test, table, b_sh, 50.0);
    nrvc::ShField truth_fit = nrvc::fit_sh_volume(tv, tg);
    nrvc::ShField test_fit = nrvc::fit_sh_volume(sv, sg);
    for (int l : {0, 2})
      emit("RISH" + std::to_string(l),
           scalar_rel_error(nrvc::rish_map(truth_fit, l),
                            nrvc::rish_map(test_fit, l), mask_ptr));
  }

  if (csv_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream(csv_path) << csv.str();
    manifest.output(csv_path);
  }
  manifest.doc["config"] = {{"b_tensor", b_tensor}, {"b_sh", b_sh},
                            {"mask", mask_path}};
  manifest.doc["seed"] = 0;
  manifest.write((csv_path.empty() ? test_path : csv_path) +
                 ".manifest.json");
  return 0;
}

void write_scheme(const nrvc::GradientTable& g, const std::string& bvals_path,
                  const std::string& bvecs_path) {
  std::ofstream bvals(bvals_path);
  for (std::size_t i = 0; i < g.size(); ++i)
    bvals << (i ? " " : "") << g.b_values[i];
  bvals << "\n";
  std::ofstream bvecs(bvecs_path);
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < g.size(); ++i)
      bvecs << (i ? " " : "") << g.directions[i][axis];
    bvecs << "\n";
  }
}

int run_phantom(const std::string& prefix, int nx, int ny, int nz, double snr,
                uint64_t seed, int n_b0,
                const std::vector<std::string>& shell_specs) {
  ManifestWriter manifest("phantom");

  std::vector<std::pair<double, int>> shells;
  for (const std::string& s : shell_specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--shell expects b:count, got " + s);
    shells.emplace_back(std::stod(s.substr(0, colon)),
                        std::stoi(s.substr(colon + 1)));
  }
  if (shells.empty()) shells = {{1000.0, 15}, {5000.0, 15}};

  nrvc::GradientTable scheme = nrvc::make_scheme(n_b0, shells);
  nrvc::Phantom phantom = nrvc::make_phantom(nx, ny, nz, scheme, seed, snr);

  const std::string vol_path = prefix + ".nii.gz";
  const std::string mask_path = prefix + ".mask.nii.gz";
  const std::string bvals_path = prefix + ".bval";
  const std::string bvecs_path = prefix + ".bvec";
  nrvc::write_nifti(phantom.volume, vol_path);
  nrvc::Volume4D mask_vol;
  mask_vol.nx = nx;
  mask_vol.ny = ny;
  mask_vol.nz = nz;
  mask_vol.m = 1;
  mask_vol.data.resize(mask_vol.sample_count());
  for (std::size_t i = 0; i < phantom.mask.labels.size(); ++i)
    mask_vol.data[i] = static_cast<float>(phantom.mask.labels[i]);
  nrvc::write_nifti(mask_vol, mask_path);
  write_scheme(scheme, bvals_path, bvecs_path);

  manifest.doc["config"] = {{"nx", nx},   {"ny", ny},     {"nz", nz},
                            {"snr", snr}, {"n_b0", n_b0}};
  manifest.doc["seed"] = seed;
  for (const auto& p : {vol_path, mask_path, bvals_path, bvecs_path})
    manifest.output(p);
  manifest.write(prefix + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-representation volume codec"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // encode
  std::string enc_in, enc_out, enc_mode = "2d", enc_variant = "siren";
  std::string enc_quant = "f16", enc_mask;
  int enc_layers = 3, enc_units = 256, enc_epochs = 2000;
  int enc_jobs = default_jobs();
  double enc_lr = 0.0, enc_omega0 = 30.0;  // lr 0 -> per-mode default
  uint64_t enc_seed = 0;
  CLI::App* enc = app.add_subcommand("encode", "Fit networks and write a container");
  enc->add_option("input", enc_in, "Input NIfTI (.nii/.nii.gz)")->required();
  enc->add_option("output", enc_out, "Output container (.nrvc)")->required();
  enc->add_option("--mode", enc_mode)->check(CLI::IsMember({"2d", "3d"}));
  enc->add_option("--layers", enc_layers)->check(CLI::PositiveNumber);
  enc->add_option("--units", enc_units)->check(CLI::PositiveNumber);
  enc->add_option("--variant", enc_variant)
      ->check(CLI::IsMember({"siren", "siren-relu", "mlp-relu", "mlp-tanh", "hybrid"}));
  enc->add_option("--epochs", enc_epochs)->check(CLI::PositiveNumber);
  enc->add_option("--lr", enc_lr, "Learning rate (default 3e-4 2d, 2e-4 3d)");
  enc->add_option("--omega0", enc_omega0);
  enc->add_option("--quant", enc_quant)->check(CLI::IsMember({"f16", "f32"}));
  enc->add_option("--seed", enc_seed);
  enc->add_option("--mask", enc_mask, "Tissue mask; background is zeroed");
  enc->add_option("--jobs", enc_jobs, "Slice-level threads (env NRVC_JOBS)")
      ->check(CLI::PositiveNumber);

  // decode
  std::string dec_in, dec_out;
  CLI::App* dec = app.add_subcommand("decode", "Reconstruct a NIfTI volume");
  dec->add_option("input", dec_in, "Input container (.nrvc)")->required();
  dec->add_option("output", dec_out, "Output NIfTI")->required();

  // metrics
  std::string met_truth, met_test, met_mask, met_json, met_csv;
  CLI::App* met = app.add_subcommand("metrics", "Fidelity report for two volumes");
  met->add_option("truth", met_truth)->required();
  met->add_option("test", met_test)->required();
  met->add_option("--mask", met_mask);
  met->add_option("--json", met_json, "Write the JSON report here");
  met->add_option("--csv", met_csv, "Also write a CSV report");

  // eval-dwi
  std::string dwi_truth, dwi_test, dwi_bvals, dwi_bvecs, dwi_mask, dwi_csv;
  double dwi_b_tensor = 1000.0, dwi_b_sh = 5000.0;
  CLI::App* dwi = app.add_subcommand("eval-dwi", "Downstream diffusion metrics");
  dwi->add_option("truth", dwi_truth)->required();
  dwi->add_option("test", dwi_test)->required();
  dwi->add_option("bvals", dwi_bvals)->required();
  dwi->add_option("bvecs", dwi_bvecs)->required();
  dwi->add_option("--mask", dwi_mask);
  dwi->add_option("--b-tensor", dwi_b_tensor, "Shell for the tensor fit");
  dwi->add_option("--b-sh", dwi_b_sh, "Shell for the SH fit");
  dwi->add_option("--csv", dwi_csv, "Write the CSV report here");

  // phantom
  std::string ph_prefix;
  int ph_nx = 32, ph_ny = 32, ph_nz = 4, ph_n_b0 = 1;
  double ph_snr = 30.0;
  uint64_t ph_seed = 0;
  std::vector<std::string> ph_shells;
  CLI::App* ph = app.add_subcommand("phantom", "Generate a synthetic dMRI phantom");
  ph->add_option("prefix", ph_prefix, "Output path prefix")->required();
  ph->add_option("--nx", ph_nx)->check(CLI::PositiveNumber);
  ph->add_option("--ny", ph_ny)->check(CLI::PositiveNumber);
  ph->add_option("--nz", ph_nz)->check(CLI::PositiveNumber);
  ph->add_option("--snr", ph_snr, "Rician SNR; <= 0 means noise-free");
  ph->add_option("--seed", ph_seed);
  ph->add_option("--n-b0", ph_n_b0);
  ph->add_option("--shell", ph_shells, "Shell as b:count (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (enc->parsed())
      return run_encode(enc_in, enc_out, enc_mode, enc_layers, enc_units,
                        enc_variant, enc_epochs, enc_lr, enc_omega0, enc_quant,
                        enc_seed, enc_mask, enc_jobs);
    if (dec->parsed()) return run_decode(dec_in, dec_out);
    if (met->parsed())
      return run_metrics(met_truth, met_test, met_mask, met_json, met_csv);
    if (dwi->parsed())
      return run_eval_dwi(dwi_truth, dwi_test, dwi_bvals, dwi_bvecs, dwi_mask,
                          dwi_b_tensor, dwi_b_sh, dwi_csv);
    if (ph->parsed())
      return run_phantom(ph_prefix, ph_nx, ph_ny, ph_nz, ph_snr, ph_seed,
                         ph_n_b0, ph_shells);
  } catch (const nrvc::DivergenceError& e) {
    std::cerr << "error: training diverged at epoch " << e.epoch;
    if (e.slice >= 0) std::cerr << " (slice " << e.slice << ")";
    std::cerr << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const nrvc::CorruptionError& e) {
    std::cerr << "error: corrupt artifact: " << e.what() << "\n";
    return kExitCorruption;
  } catch (const nrvc::FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return kExitFormat;
  } catch (const nrvc::UnsupportedError& e) {
    std::cerr << "error: unsupported input: " << e.what() << "\n";
    return kExitFormat;
  } catch (const nrvc::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
