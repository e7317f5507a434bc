#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tgan/data.hpp"
#include "tgan/eval.hpp"
#include "tgan/gan.hpp"

namespace tgan::io {

// Flat `key = value` run configuration. Every key has a default except the
// MNIST file paths; unknown keys are rejected. (RunConfig, code version)
// fully determines a run.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    std::string dataset_kind = "ring";  // ring | mnist
    std::size_t ring_modes = 8;
    double ring_radius = 1.0;
    double ring_std = 0.05;
    std::size_t ring_n = 500;
    bool ring_labeled = true;
    std::string mnist_images;  // required for mnist
    std::string mnist_labels;  // required for mnist
    std::size_t mnist_per_class = 50;
    std::size_t mnist_side = 8;

    std::string latent_kind = "t_mixture";
    std::size_t latent_components = 8;
    std::size_t latent_dim = 10;
    double latent_nu = 5.0;
    std::size_t latent_attention_hidden = 0;
    double latent_sigma_penalty = 0.0;

    std::size_t model_hidden = 128;

    std::size_t train_steps = 5000;
    std::size_t train_batch = 64;
    double train_lr = 2e-4;
    std::string train_optimizer = "adam";
    double train_alpha = 1.0;
    std::string train_g_mode = "nonsaturating";
    std::size_t train_d_g_ratio = 1;
    double train_dropout = 0.3;
    std::size_t train_checkpoint_interval = 1000;

    std::size_t eval_samples = 4000;
    std::size_t eval_splits = 10;
    double eval_threshold_sigma = 3.0;
    double eval_tail_fraction = 0.1;
    std::size_t sample_rows = 8;

    std::size_t verify_count = 50;
    std::size_t verify_max_p = 5;
    std::size_t verify_grid_points = 13;
    std::size_t verify_samples = 10000;
    double verify_ks_significance = 0.001;
    double verify_perturb_density = 0.0;
};

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config_text(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);

// Checkpoint container: magic "TGAN", format version u32 LE, u32 LE record
// count, then (name length u32 LE, name bytes, element count u64 LE,
// f64 LE array) per record.
struct Checkpoint {
    std::vector<std::pair<std::string, std::vector<double>>> records;
    const std::vector<double>* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> blob);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Model <-> checkpoint. The checkpoint also carries `meta.*` scalars
// (architecture and data geometry) so sampling needs no extra config.
struct ModelBundle {
    gan::Model model;
    std::size_t hidden = 0;
    std::size_t side = 0;  // 0 for non-image data
    double dropout = 0.3;
};

Checkpoint checkpoint_from_bundle(const ModelBundle& bundle);
ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt);

// (v + 1) * 127.5 rounded half-to-even, clamped to [0, 255].
std::uint8_t pixel_from_value(double v);

// Column-per-label grid with 1-pixel separators (value 128).
// samples holds cols*rows images of side^2 values, column-major
// (samples for column 0 first).
std::vector<std::uint8_t> render_grid(std::span<const double> samples, std::size_t cols,
                                      std::size_t rows, std::size_t side);
void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);

// Command implementations; return process exit codes:
// 0 ok, 1 check failure, 2 usage, 3 numerical abort, 4 bad artifact.
int cmd_verify_theorem(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_sample(const RunConfig& cfg, const std::string& ckpt_path,
               const std::vector<std::size_t>& labels, std::size_t per_label,
               std::ostream& log);
int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& ckpt_paths,
             std::ostream& log);

// Full argv dispatch used by the binary.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tgan::io
