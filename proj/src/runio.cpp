#include "tgan/runio.hpp"

#include <algorithm>
#include <bit>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "tgan/tdist.hpp"

namespace tgan::io {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw Error("config: key '" + key + "' expects a number, got '" + value + "'");
    }
    if (pos != value.size()) {
        throw Error("config: key '" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw Error("config: key '" + key + "' expects an unsigned integer, got '" +
                    value + "'");
    }
    if (pos != value.size()) {
        throw Error("config: key '" + key + "' expects an unsigned integer, got '" +
                    value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
}

}  // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "dataset.kind") {
        if (value != "ring" && value != "mnist")
            throw Error("config: dataset.kind must be ring or mnist");
        cfg.dataset_kind = value;
    } else if (key == "dataset.modes") cfg.ring_modes = parse_u64(key, value);
    else if (key == "dataset.radius") cfg.ring_radius = parse_double(key, value);
    else if (key == "dataset.std") cfg.ring_std = parse_double(key, value);
    else if (key == "dataset.n") cfg.ring_n = parse_u64(key, value);
    else if (key == "dataset.labeled") cfg.ring_labeled = parse_bool(key, value);
    else if (key == "dataset.images") cfg.mnist_images = value;
    else if (key == "dataset.labels") cfg.mnist_labels = value;
    else if (key == "dataset.per_class") cfg.mnist_per_class = parse_u64(key, value);
    else if (key == "dataset.side") cfg.mnist_side = parse_u64(key, value);
    else if (key == "latent.kind") cfg.latent_kind = latent::to_string(latent::noise_kind_from_string(value));
    else if (key == "latent.components") cfg.latent_components = parse_u64(key, value);
    else if (key == "latent.dim") cfg.latent_dim = parse_u64(key, value);
    else if (key == "latent.nu") cfg.latent_nu = parse_double(key, value);
    else if (key == "latent.attention_hidden") cfg.latent_attention_hidden = parse_u64(key, value);
    else if (key == "latent.sigma_penalty") cfg.latent_sigma_penalty = parse_double(key, value);
    else if (key == "model.hidden") cfg.model_hidden = parse_u64(key, value);
    else if (key == "train.steps") cfg.train_steps = parse_u64(key, value);
    else if (key == "train.batch") cfg.train_batch = parse_u64(key, value);
    else if (key == "train.lr") cfg.train_lr = parse_double(key, value);
    else if (key == "train.optimizer") {
        if (value != "adam" && value != "sgd")
            throw Error("config: train.optimizer must be adam or sgd");
        cfg.train_optimizer = value;
    } else if (key == "train.alpha") cfg.train_alpha = parse_double(key, value);
    else if (key == "train.g_mode") {
        gan::g_mode_from_string(value);
        cfg.train_g_mode = value;
    } else if (key == "train.d_g_ratio") cfg.train_d_g_ratio = parse_u64(key, value);
    else if (key == "train.dropout") cfg.train_dropout = parse_double(key, value);
    else if (key == "train.checkpoint_interval") cfg.train_checkpoint_interval = parse_u64(key, value);
    else if (key == "eval.samples") cfg.eval_samples = parse_u64(key, value);
    else if (key == "eval.splits") cfg.eval_splits = parse_u64(key, value);
    else if (key == "eval.threshold_sigma") cfg.eval_threshold_sigma = parse_double(key, value);
    else if (key == "eval.tail_fraction") cfg.eval_tail_fraction = parse_double(key, value);
    else if (key == "sample.rows") cfg.sample_rows = parse_u64(key, value);
    else if (key == "verify.count") cfg.verify_count = parse_u64(key, value);
    else if (key == "verify.max_p") cfg.verify_max_p = parse_u64(key, value);
    else if (key == "verify.grid_points") cfg.verify_grid_points = parse_u64(key, value);
    else if (key == "verify.samples") cfg.verify_samples = parse_u64(key, value);
    else if (key == "verify.ks_significance") cfg.verify_ks_significance = parse_double(key, value);
    else if (key == "verify.perturb_density") cfg.verify_perturb_density = parse_double(key, value);
    else throw Error("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "seed = " << c.seed << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    os << "dataset.kind = " << c.dataset_kind << "\n";
    os << "dataset.modes = " << c.ring_modes << "\n";
    os << "dataset.radius = " << fmt_double(c.ring_radius) << "\n";
    os << "dataset.std = " << fmt_double(c.ring_std) << "\n";
    os << "dataset.n = " << c.ring_n << "\n";
    os << "dataset.labeled = " << (c.ring_labeled ? "true" : "false") << "\n";
    os << "dataset.images = " << c.mnist_images << "\n";
    os << "dataset.labels = " << c.mnist_labels << "\n";
    os << "dataset.per_class = " << c.mnist_per_class << "\n";
    os << "dataset.side = " << c.mnist_side << "\n";
    os << "latent.kind = " << c.latent_kind << "\n";
    os << "latent.components = " << c.latent_components << "\n";
    os << "latent.dim = " << c.latent_dim << "\n";
    os << "latent.nu = " << fmt_double(c.latent_nu) << "\n";
    os << "latent.attention_hidden = " << c.latent_attention_hidden << "\n";
    os << "latent.sigma_penalty = " << fmt_double(c.latent_sigma_penalty) << "\n";
    os << "model.hidden = " << c.model_hidden << "\n";
    os << "train.steps = " << c.train_steps << "\n";
    os << "train.batch = " << c.train_batch << "\n";
    os << "train.lr = " << fmt_double(c.train_lr) << "\n";
    os << "train.optimizer = " << c.train_optimizer << "\n";
    os << "train.alpha = " << fmt_double(c.train_alpha) << "\n";
    os << "train.g_mode = " << c.train_g_mode << "\n";
    os << "train.d_g_ratio = " << c.train_d_g_ratio << "\n";
    os << "train.dropout = " << fmt_double(c.train_dropout) << "\n";
    os << "train.checkpoint_interval = " << c.train_checkpoint_interval << "\n";
    os << "eval.samples = " << c.eval_samples << "\n";
    os << "eval.splits = " << c.eval_splits << "\n";
    os << "eval.threshold_sigma = " << fmt_double(c.eval_threshold_sigma) << "\n";
    os << "eval.tail_fraction = " << fmt_double(c.eval_tail_fraction) << "\n";
    os << "sample.rows = " << c.sample_rows << "\n";
    os << "verify.count = " << c.verify_count << "\n";
    os << "verify.max_p = " << c.verify_max_p << "\n";
    os << "verify.grid_points = " << c.verify_grid_points << "\n";
    os << "verify.samples = " << c.verify_samples << "\n";
    os << "verify.ks_significance = " << fmt_double(c.verify_ks_significance) << "\n";
    os << "verify.perturb_density = " << fmt_double(c.verify_perturb_density) << "\n";
    return os.str();
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
const char kCheckpointMagic[4] = {'T', 'G', 'A', 'N'};

void push_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void push_le64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_le32(std::span<const std::uint8_t> blob, std::size_t& off) {
    if (off + 4 > blob.size()) throw FormatError("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(blob[off + i]) << (8 * i);
    off += 4;
    return v;
}

std::uint64_t read_le64(std::span<const std::uint8_t> blob, std::size_t& off) {
    if (off + 8 > blob.size()) throw FormatError("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(blob[off + i]) << (8 * i);
    off += 8;
    return v;
}

}  // namespace

const std::vector<double>* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, v] : records) {
        if (n == name) return &v;
    }
    return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    push_le32(out, kCheckpointVersion);
    push_le32(out, static_cast<std::uint32_t>(ckpt.records.size()));
    for (const auto& [name, values] : ckpt.records) {
        push_le32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        push_le64(out, values.size());
        for (double d : values) push_le64(out, std::bit_cast<std::uint64_t>(d));
    }
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> blob) {
    std::size_t off = 0;
    if (blob.size() < 4 || std::memcmp(blob.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("checkpoint: bad magic");
    }
    off = 4;
    const std::uint32_t version = read_le32(blob, off);
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
    }
    const std::uint32_t count = read_le32(blob, off);
    Checkpoint ckpt;
    ckpt.records.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint32_t name_len = read_le32(blob, off);
        if (off + name_len > blob.size()) throw FormatError("checkpoint: truncated name");
        std::string name(reinterpret_cast<const char*>(blob.data() + off), name_len);
        off += name_len;
        const std::uint64_t n = read_le64(blob, off);
        if (off + 8 * n > blob.size()) throw FormatError("checkpoint: truncated payload");
        std::vector<double> values(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            values[i] = std::bit_cast<double>(read_le64(blob, off));
        }
        ckpt.records.emplace_back(std::move(name), std::move(values));
    }
    if (off != blob.size()) throw FormatError("checkpoint: trailing bytes");
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

Checkpoint checkpoint_from_bundle(const ModelBundle& bundle) {
    Checkpoint ckpt;
    const auto& m = bundle.model;
    auto meta = [&](const std::string& name, double v) {
        ckpt.records.emplace_back(name, std::vector<double>{v});
    };
    meta("meta.data_dim", static_cast<double>(m.gen.data_dim()));
    meta("meta.hidden", static_cast<double>(bundle.hidden));
    meta("meta.num_classes", static_cast<double>(m.lcfg.num_classes));
    meta("meta.side", static_cast<double>(bundle.side));
    meta("meta.dropout", bundle.dropout);
    meta("meta.latent_kind", static_cast<double>(static_cast<int>(m.lcfg.kind)));
    meta("meta.latent_components", static_cast<double>(m.lcfg.components));
    meta("meta.latent_dim", static_cast<double>(m.lcfg.dim));
    meta("meta.latent_nu", m.lcfg.nu);
    meta("meta.latent_attention_hidden", static_cast<double>(m.lcfg.attention_hidden));
    meta("meta.latent_sigma_penalty", m.lcfg.sigma_penalty);
    for (const auto& [name, t] : m.named()) {
        ckpt.records.emplace_back(name,
                                  std::vector<double>(t.values().begin(), t.values().end()));
    }
    return ckpt;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt) {
    auto meta = [&](const std::string& name) {
        const auto* v = ckpt.find(name);
        if (!v || v->size() != 1) throw FormatError("checkpoint: missing record " + name);
        return (*v)[0];
    };
    latent::LatentConfig lcfg;
    const int kind = static_cast<int>(meta("meta.latent_kind"));
    if (kind < 0 || kind > 2) throw FormatError("checkpoint: bad latent kind");
    lcfg.kind = static_cast<latent::NoiseKind>(kind);
    lcfg.components = static_cast<std::size_t>(meta("meta.latent_components"));
    lcfg.dim = static_cast<std::size_t>(meta("meta.latent_dim"));
    lcfg.nu = meta("meta.latent_nu");
    lcfg.num_classes = static_cast<std::size_t>(meta("meta.num_classes"));
    lcfg.attention_hidden = static_cast<std::size_t>(meta("meta.latent_attention_hidden"));
    lcfg.sigma_penalty = meta("meta.latent_sigma_penalty");

    ModelBundle bundle;
    bundle.hidden = static_cast<std::size_t>(meta("meta.hidden"));
    bundle.side = static_cast<std::size_t>(meta("meta.side"));
    bundle.dropout = meta("meta.dropout");
    const auto data_dim = static_cast<std::size_t>(meta("meta.data_dim"));
    Rng init_rng(0);
    bundle.model = gan::Model::init(lcfg, bundle.hidden, data_dim, bundle.dropout, init_rng);

    std::size_t loaded = 0;
    for (auto& [name, t] : bundle.model.named()) {
        const auto* rec = ckpt.find(name);
        if (!rec) throw FormatError("checkpoint: missing parameter " + name);
        if (rec->size() != t.numel()) {
            throw FormatError("checkpoint: parameter " + name + " has " +
                              std::to_string(rec->size()) + " values, expected " +
                              std::to_string(t.numel()));
        }
        auto dst = t.values_mut();
        std::copy(rec->begin(), rec->end(), dst.begin());
        ++loaded;
    }
    const std::size_t meta_records = 11;
    if (ckpt.records.size() != loaded + meta_records) {
        throw FormatError("checkpoint: unexpected extra records");
    }
    return bundle;
}

std::uint8_t pixel_from_value(double v) {
    const double scaled = (v + 1.0) * 127.5;
    const double rounded = std::nearbyint(scaled);  // default mode: half to even
    return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

std::vector<std::uint8_t> render_grid(std::span<const double> samples, std::size_t cols,
                                      std::size_t rows, std::size_t side) {
    const std::size_t dim = side * side;
    if (samples.size() != cols * rows * dim) {
        throw ShapeError("render grid: expected " + std::to_string(cols * rows * dim) +
                         " values, got " + std::to_string(samples.size()));
    }
    const std::size_t width = cols * side + (cols - 1);
    const std::size_t height = rows * side + (rows - 1);
    std::vector<std::uint8_t> img(width * height, 128);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* cell = samples.data() + (c * rows + r) * dim;
            const std::size_t y0 = r * (side + 1), x0 = c * (side + 1);
            for (std::size_t y = 0; y < side; ++y)
                for (std::size_t x = 0; x < side; ++x)
                    img[(y0 + y) * width + x0 + x] = pixel_from_value(cell[y * side + x]);
        }
    }
    return img;
}

void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
    if (pixels.size() != width * height) throw ShapeError("pgm: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

namespace {

struct BuiltDataset {
    data::Dataset ds;
    std::size_t side = 0;       // 0 for 2-D data
    bool is_ring = false;
    data::RingSpec ring;
};

BuiltDataset build_dataset(const RunConfig& cfg) {
    BuiltDataset out;
    if (cfg.dataset_kind == "ring") {
        out.is_ring = true;
        out.ring = {cfg.ring_modes, cfg.ring_radius, cfg.ring_std, cfg.ring_n,
                    cfg.ring_labeled};
        Rng rng(Rng(cfg.seed).split(100).seed());
        out.ds = data::ring_of_gaussians(out.ring, rng);
        return out;
    }
    if (cfg.dataset_kind == "mnist") {
        if (cfg.mnist_images.empty() || cfg.mnist_labels.empty()) {
            throw Error("config: dataset.images and dataset.labels are required for mnist");
        }
        auto full = data::load_idx(cfg.mnist_images, cfg.mnist_labels);
        Rng rng(Rng(cfg.seed).split(101).seed());
        auto subset = data::balanced_subset(full, cfg.mnist_per_class, rng);
        const auto from_side = static_cast<std::size_t>(std::lround(std::sqrt(
            static_cast<double>(subset.dim))));
        out.side = cfg.mnist_side;
        out.ds = from_side == cfg.mnist_side
                     ? std::move(subset)
                     : data::downsample(subset, from_side, cfg.mnist_side);
        return out;
    }
    throw Error("config: unknown dataset kind '" + cfg.dataset_kind + "'");
}

latent::LatentConfig latent_config_for(const RunConfig& cfg, std::size_t num_classes) {
    latent::LatentConfig lcfg;
    lcfg.kind = latent::noise_kind_from_string(cfg.latent_kind);
    lcfg.components = cfg.latent_components;
    lcfg.dim = cfg.latent_dim;
    lcfg.nu = cfg.latent_nu;
    lcfg.num_classes = num_classes;
    lcfg.attention_hidden = cfg.latent_attention_hidden;
    lcfg.sigma_penalty = cfg.latent_sigma_penalty;
    return lcfg;
}

eval::ClassifierConfig classifier_config_for(const RunConfig& cfg) {
    eval::ClassifierConfig ccfg;
    ccfg.target_accuracy = cfg.dataset_kind == "mnist" ? 0.90 : 0.97;
    return ccfg;
}

std::vector<std::size_t> cycled_labels(std::size_t n, std::size_t num_classes) {
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % num_classes;
    return labels;
}

double max_abs_grad(const gan::Model& model) {
    double mx = 0.0;
    for (const auto& [name, t] : model.named()) {
        for (double g : t.grad()) mx = std::max(mx, std::abs(g));
    }
    return mx;
}

eval::EvalReport evaluate_model(const RunConfig& cfg, const BuiltDataset& built,
                                const gan::Model& model, const eval::Classifier& clf,
                                std::span<const double> d_adv_series) {
    eval::EvalReport report;
    report.classifier_digest = clf.digest();

    Rng rng(Rng(cfg.seed).split(102).seed());
    const auto labels = cycled_labels(cfg.eval_samples, model.lcfg.num_classes);
    const auto samples = gan::sample(model, labels, rng);

    if (built.is_ring) {
        const auto centers = data::ring_centers(built.ring);
        const auto mc = eval::mode_coverage(samples, labels.size(), centers,
                                            built.ring.modes,
                                            data::ring_scaled_std(built.ring),
                                            cfg.eval_threshold_sigma);
        report.modes_recovered = mc.modes_recovered;
        report.high_quality_fraction = mc.high_quality_fraction;
    }
    const auto is = eval::proxy_inception_score(samples, labels.size(), clf, cfg.eval_splits);
    report.proxy_is_mean = is.first;
    report.proxy_is_std = is.second;
    report.conditional_accuracy =
        eval::conditional_accuracy(samples, labels.size(), labels, clf);
    if (d_adv_series.size() >= 10) {
        report.d_loss_tail_mean = eval::loss_equilibrium(d_adv_series, cfg.eval_tail_fraction);
    }
    report.validate();
    return report;
}

void emit_sample_artifacts(const RunConfig& cfg, const BuiltDataset& built,
                           const gan::Model& model, const std::string& dir) {
    const std::size_t C = model.lcfg.num_classes;
    const std::size_t rows = cfg.sample_rows;
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < rows; ++r) labels.push_back(c);
    Rng rng(Rng(cfg.seed).split(103).seed());
    const auto samples = gan::sample(model, labels, rng);

    {
        std::ofstream out(dir + "/samples.csv", std::ios::binary);
        if (!out) throw IoError("cannot write samples.csv");
        const std::size_t dim = model.gen.data_dim();
        out << "label";
        for (std::size_t j = 0; j < dim; ++j) out << ",x" << j;
        out << "\n";
        char buf[32];
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out << labels[i];
            for (std::size_t j = 0; j < dim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", samples[i * dim + j]);
                out << "," << buf;
            }
            out << "\n";
        }
    }
    if (built.side > 0) {
        const auto img = render_grid(samples, C, rows, built.side);
        write_pgm(dir + "/samples_grid.pgm", C * built.side + (C - 1),
                  rows * built.side + (rows - 1), img);
    } else {
        std::ofstream out(dir + "/samples_scatter.csv", std::ios::binary);
        if (!out) throw IoError("cannot write samples_scatter.csv");
        out << "x,y,label\n";
        char buf[64];
        for (std::size_t i = 0; i < labels.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g", samples[2 * i], samples[2 * i + 1]);
            out << buf << "," << labels[i] << "\n";
        }
    }
}

}  // namespace

int cmd_verify_theorem(const RunConfig& cfg, std::ostream& log) {
    if (cfg.verify_count == 0) {
        log << "verify-theorem: empty sweep (verify.count = 0)\n";
        return 2;
    }
    fs::create_directories(cfg.out_dir);
    static const double nus[] = {1.0, 2.0, 3.0, 5.0, 10.0, 30.0};
    Rng rng(Rng(cfg.seed).split(200).seed());
    tdist::TheoremOptions opts;
    opts.ks_significance = cfg.verify_ks_significance;
    opts.density_perturb = cfg.verify_perturb_density;

    tdist::TheoremReport all;
    for (std::size_t i = 0; i < cfg.verify_count; ++i) {
        auto set_rng = rng.split(i);
        tdist::TDistParams params;
        const std::size_t p = 1 + set_rng.next_u64() % cfg.verify_max_p;
        params.nu = nus[set_rng.next_u64() % 6];
        params.mu.resize(p);
        params.sigma.resize(p);
        for (auto& m : params.mu) m = -10.0 + 20.0 * set_rng.uniform01();
        for (auto& s : params.sigma) s = 0.1 + 9.9 * set_rng.uniform01();
        const auto grid = tdist::axis_grid(params, cfg.verify_grid_points);
        auto sample_rng = set_rng.split(1);
        auto report = tdist::verify_transform_theorem(params, grid, cfg.verify_samples,
                                                      sample_rng, opts);
        for (auto& c : report.checks) all.checks.push_back(std::move(c));
    }
    {
        std::ofstream out(cfg.out_dir + "/theorem_report.csv", std::ios::binary);
        if (!out) throw IoError("cannot write theorem_report.csv");
        tdist::write_theorem_csv(all, out);
    }
    bool ok = true;
    for (const auto& c : all.checks) {
        if (!c.pass) {
            ok = false;
            log << "FAIL " << c.check << " params=" << c.parameter_digest
                << " statistic=" << c.statistic << " threshold=" << c.threshold;
            if (!c.detail.empty()) log << " (" << c.detail << ")";
            log << "\n";
        }
    }
    log << "verify-theorem: " << all.checks.size() << " checks, "
        << (ok ? "all passed" : "FAILURES above") << "\n";
    return ok ? 0 : 1;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
    fs::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/config.txt", serialize_config(cfg));

    auto built = build_dataset(cfg);
    const auto& ds = built.ds;

    auto lcfg = latent_config_for(cfg, ds.num_classes);
    lcfg.validate(&log);
    Rng model_rng(Rng(cfg.seed).split(0).seed());
    auto model = gan::Model::init(lcfg, cfg.model_hidden, ds.dim, cfg.train_dropout,
                                  model_rng);

    gan::TrainConfig tcfg;
    tcfg.lr = cfg.train_lr;
    tcfg.optimizer = cfg.train_optimizer;
    tcfg.alpha = cfg.train_alpha;
    tcfg.g_mode = gan::g_mode_from_string(cfg.train_g_mode);
    tcfg.d_steps_per_g = cfg.train_d_g_ratio;
    tcfg.dropout = cfg.train_dropout;
    gan::Trainer trainer(std::move(model), tcfg, Rng(cfg.seed).split(1).seed());

    std::ostringstream losses;
    losses << "step,d_loss,g_loss,c_loss\n";
    std::vector<double> d_adv_series;
    d_adv_series.reserve(cfg.train_steps);
    Rng data_rng(Rng(cfg.seed).split(2).seed());

    auto save = [&](const std::string& name) {
        ModelBundle bundle{trainer.model(), cfg.model_hidden, built.side, cfg.train_dropout};
        save_checkpoint(cfg.out_dir + "/" + name, checkpoint_from_bundle(bundle));
    };

    try {
        for (std::size_t step = 0; step < cfg.train_steps; ++step) {
            auto batch_rng = data_rng.split(step);
            const std::size_t b = std::min(cfg.train_batch, ds.size());
            std::vector<double> xb(b * ds.dim);
            std::vector<std::size_t> yb(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t idx = batch_rng.next_u64() % ds.size();
                auto r = ds.row(idx);
                std::copy(r.begin(), r.end(), xb.begin() + i * ds.dim);
                yb[i] = ds.labels[idx];
            }
            const auto report = trainer.step(xb, yb);
            d_adv_series.push_back(report.d_adv);
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", step, report.d_loss,
                          report.g_loss, report.c_loss);
            losses << buf;
            if (cfg.train_checkpoint_interval > 0 &&
                (step + 1) % cfg.train_checkpoint_interval == 0 &&
                step + 1 < cfg.train_steps) {
                char name[48];
                std::snprintf(name, sizeof(name), "ckpt_%08zu.tgan", step + 1);
                save(name);
            }
        }
    } catch (const NumericError& e) {
        std::ostringstream diag;
        diag << "training aborted\n"
             << "step: " << trainer.steps_done() << "\n"
             << "error: " << e.what() << "\n"
             << "max |grad|: " << max_abs_grad(trainer.model()) << "\n";
        write_text_file(cfg.out_dir + "/abort_diagnostics.txt", diag.str());
        write_text_file(cfg.out_dir + "/losses.csv", losses.str());
        log << "train: aborted, " << e.what() << "\n";
        return 3;
    }

    write_text_file(cfg.out_dir + "/losses.csv", losses.str());
    save("final.tgan");
    emit_sample_artifacts(cfg, built, trainer.model(), cfg.out_dir);

    Rng clf_rng(Rng(cfg.seed).split(104).seed());
    const auto clf = eval::train_classifier(ds, classifier_config_for(cfg), clf_rng);
    const auto report = evaluate_model(cfg, built, trainer.model(), clf, d_adv_series);
    write_text_file(cfg.out_dir + "/eval_report.csv",
                    eval::report_csv_header() + "\n" +
                        eval::report_csv_row(report, cfg.latent_kind) + "\n");
    write_text_file(cfg.out_dir + "/eval_report.txt",
                    eval::report_text(report, cfg.latent_kind));
    log << eval::report_text(report, cfg.latent_kind);
    log << "train: " << cfg.train_steps << " steps done, artifacts in " << cfg.out_dir
        << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& ckpt_path,
               const std::vector<std::size_t>& labels, std::size_t per_label,
               std::ostream& log) {
    auto bundle = bundle_from_checkpoint(load_checkpoint(ckpt_path));
    const std::size_t C = bundle.model.lcfg.num_classes;
    std::vector<std::size_t> cols = labels;
    if (cols.empty()) {
        cols.resize(C);
        for (std::size_t c = 0; c < C; ++c) cols[c] = c;
    }
    for (auto l : cols) {
        if (l >= C) throw DomainError("sample: label " + std::to_string(l) +
                                      " out of range for " + std::to_string(C) + " classes");
    }
    fs::create_directories(cfg.out_dir);

    std::vector<std::size_t> flat;
    for (auto c : cols)
        for (std::size_t r = 0; r < per_label; ++r) flat.push_back(c);
    Rng rng(Rng(cfg.seed).split(103).seed());
    const auto samples = gan::sample(bundle.model, flat, rng);
    const std::size_t dim = bundle.model.gen.data_dim();

    {
        std::ofstream out(cfg.out_dir + "/samples.csv", std::ios::binary);
        if (!out) throw IoError("cannot write samples.csv");
        out << "label";
        for (std::size_t j = 0; j < dim; ++j) out << ",x" << j;
        out << "\n";
        char buf[32];
        for (std::size_t i = 0; i < flat.size(); ++i) {
            out << flat[i];
            for (std::size_t j = 0; j < dim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", samples[i * dim + j]);
                out << "," << buf;
            }
            out << "\n";
        }
    }
    if (bundle.side > 0 && per_label > 0) {
        const auto img = render_grid(samples, cols.size(), per_label, bundle.side);
        write_pgm(cfg.out_dir + "/samples_grid.pgm",
                  cols.size() * bundle.side + (cols.size() - 1),
                  per_label * bundle.side + (per_label - 1), img);
    } else if (bundle.side == 0) {
        std::ofstream out(cfg.out_dir + "/samples_scatter.csv", std::ios::binary);
        if (!out) throw IoError("cannot write samples_scatter.csv");
        out << "x,y,label\n";
        char buf[64];
        for (std::size_t i = 0; i < flat.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g", samples[2 * i], samples[2 * i + 1]);
            out << buf << "," << flat[i] << "\n";
        }
    }
    log << "sample: " << flat.size() << " samples written to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& ckpt_paths,
             std::ostream& log) {
    if (ckpt_paths.empty()) {
        log << "eval: at least one --ckpt is required\n";
        return 2;
    }
    fs::create_directories(cfg.out_dir);
    auto built = build_dataset(cfg);
    Rng clf_rng(Rng(cfg.seed).split(104).seed());
    const auto clf = eval::train_classifier(built.ds, classifier_config_for(cfg), clf_rng);

    std::ostringstream csv, text;
    csv << eval::report_csv_header() << "\n";
    for (const auto& path : ckpt_paths) {
        auto bundle = bundle_from_checkpoint(load_checkpoint(path));
        if (bundle.model.gen.data_dim() != built.ds.dim) {
            throw Error("eval: checkpoint dimension " +
                        std::to_string(bundle.model.gen.data_dim()) +
                        " does not match dataset dimension " + std::to_string(built.ds.dim));
        }
        const auto report = evaluate_model(cfg, built, bundle.model, clf, {});
        const std::string name =
            latent::to_string(bundle.model.lcfg.kind) + ":" + fs::path(path).filename().string();
        csv << eval::report_csv_row(report, name) << "\n";
        text << eval::report_text(report, name);
    }
    write_text_file(cfg.out_dir + "/eval_report.csv", csv.str());
    write_text_file(cfg.out_dir + "/eval_report.txt", text.str());
    log << text.str();
    return 0;
}

namespace {

std::vector<std::size_t> parse_label_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_u64("labels", item));
    }
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const std::string usage =
        "usage: tgan <verify-theorem|train|sample|eval> [--config file] [--key value ...]\n"
        "  sample: --ckpt path [--labels 0,1,...] [--n rows]\n"
        "  eval:   --ckpt path [--ckpt path ...]\n";
    if (argc < 2) {
        err << usage;
        return 2;
    }
    const std::string command = argv[1];
    std::vector<std::pair<std::string, std::string>> kvs;
    for (int i = 2; i < argc; i += 2) {
        std::string key = argv[i];
        if (key.rfind("--", 0) != 0 || i + 1 >= argc) {
            err << "expected --key value pairs\n" << usage;
            return 2;
        }
        kvs.emplace_back(key.substr(2), argv[i + 1]);
    }

    try {
        RunConfig cfg;
        for (const auto& [k, v] : kvs) {
            if (k == "config") cfg = load_config_file(v);
        }
        std::vector<std::string> ckpts;
        std::vector<std::size_t> labels;
        std::size_t per_label = cfg.sample_rows;
        bool per_label_set = false;
        for (const auto& [k, v] : kvs) {
            if (k == "config") continue;
            if (k == "ckpt") {
                ckpts.push_back(v);
            } else if (k == "labels") {
                labels = parse_label_list(v);
            } else if (k == "n") {
                per_label = parse_u64("n", v);
                per_label_set = true;
            } else if (k == "perturb-density") {
                cfg.verify_perturb_density = parse_double(k, v);
            } else {
                apply_kv(cfg, k, v);
            }
        }
        if (!per_label_set) per_label = cfg.sample_rows;

        if (command == "verify-theorem") return cmd_verify_theorem(cfg, out);
        if (command == "train") return cmd_train(cfg, out);
        if (command == "sample") {
            if (ckpts.size() != 1) {
                err << "sample: exactly one --ckpt is required\n";
                return 2;
            }
            return cmd_sample(cfg, ckpts[0], labels, per_label, out);
        }
        if (command == "eval") return cmd_eval(cfg, ckpts, out);
        err << "unknown command '" << command << "'\n" << usage;
        return 2;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace tgan::io
