#include "tgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>

namespace tgan::data {

namespace {

constexpr std::uint32_t kImagesMagic = 2051;
constexpr std::uint32_t kLabelsMagic = 2049;

std::uint32_t read_be32(std::span<const std::uint8_t> blob, std::size_t off) {
    if (off + 4 > blob.size()) throw FormatError("idx: truncated header");
    return (static_cast<std::uint32_t>(blob[off]) << 24) |
           (static_cast<std::uint32_t>(blob[off + 1]) << 16) |
           (static_cast<std::uint32_t>(blob[off + 2]) << 8) |
           static_cast<std::uint32_t>(blob[off + 3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto l : labels) ++counts[l];
    return counts;
}

void Dataset::validate() const {
    if (dim == 0) throw DomainError("dataset: zero dimension");
    if (samples.size() != labels.size() * dim) {
        throw DomainError("dataset: " + std::to_string(samples.size()) + " values for " +
                          std::to_string(labels.size()) + " rows of width " +
                          std::to_string(dim));
    }
    if (num_classes == 0) throw DomainError("dataset: zero classes");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i] >= -1.0 && samples[i] <= 1.0)) {
            throw DomainError("dataset: value " + std::to_string(samples[i]) +
                              " at flat index " + std::to_string(i) +
                              " outside [-1, 1]");
        }
    }
    for (auto l : labels) {
        if (l >= num_classes) {
            throw DomainError("dataset: label " + std::to_string(l) + " >= " +
                              std::to_string(num_classes));
        }
    }
}

std::vector<double> ring_centers(const RingSpec& spec) {
    // The rescale keeps a 6-sigma envelope of every mode inside [-1,1]^2.
    const double scale = 1.0 / (spec.radius + 6.0 * spec.stddev);
    std::vector<double> centers(spec.modes * 2);
    for (std::size_t j = 0; j < spec.modes; ++j) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) /
                             static_cast<double>(spec.modes);
        centers[2 * j] = scale * spec.radius * std::cos(angle);
        centers[2 * j + 1] = scale * spec.radius * std::sin(angle);
    }
    return centers;
}

double ring_scaled_std(const RingSpec& spec) {
    return spec.stddev / (spec.radius + 6.0 * spec.stddev);
}

Dataset ring_of_gaussians(const RingSpec& spec, Rng& rng) {
    if (spec.modes < 1) throw DomainError("ring: need at least one mode");
    if (!(spec.stddev > 0.0)) throw DomainError("ring: std must be positive");
    if (!(spec.radius > 0.0)) throw DomainError("ring: radius must be positive");
    const double scale = 1.0 / (spec.radius + 6.0 * spec.stddev);
    Dataset ds;
    ds.dim = 2;
    ds.num_classes = spec.labeled ? spec.modes : 1;
    ds.samples.resize(spec.n * 2);
    ds.labels.resize(spec.n);
    ds.meta = "ring(" + std::to_string(spec.modes) + ")";
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t mode = rng.next_u64() % spec.modes;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(mode) /
                             static_cast<double>(spec.modes);
        double x = spec.radius * std::cos(angle) + spec.stddev * rng.normal();
        double y = spec.radius * std::sin(angle) + spec.stddev * rng.normal();
        ds.samples[2 * i] = std::clamp(scale * x, -1.0, 1.0);
        ds.samples[2 * i + 1] = std::clamp(scale * y, -1.0, 1.0);
        ds.labels[i] = spec.labeled ? mode : 0;
    }
    ds.validate();
    return ds;
}

IdxImages decode_idx_images(std::span<const std::uint8_t> blob) {
    const std::uint32_t magic = read_be32(blob, 0);
    if (magic != kImagesMagic) {
        throw FormatError("idx images: bad magic " + std::to_string(magic) +
                          ", expected " + std::to_string(kImagesMagic));
    }
    IdxImages img;
    img.count = read_be32(blob, 4);
    img.rows = read_be32(blob, 8);
    img.cols = read_be32(blob, 12);
    const std::size_t expected = 16 + img.count * img.rows * img.cols;
    if (blob.size() < expected) {
        throw FormatError("idx images: payload has " + std::to_string(blob.size() - 16) +
                          " bytes, header promises " +
                          std::to_string(img.count * img.rows * img.cols));
    }
    if (blob.size() > expected) throw FormatError("idx images: trailing bytes");
    img.pixels.assign(blob.begin() + 16, blob.end());
    return img;
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
    if (images.pixels.size() != images.count * images.rows * images.cols) {
        throw FormatError("idx images: pixel buffer does not match header");
    }
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    push_be32(out, kImagesMagic);
    push_be32(out, static_cast<std::uint32_t>(images.count));
    push_be32(out, static_cast<std::uint32_t>(images.rows));
    push_be32(out, static_cast<std::uint32_t>(images.cols));
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> decode_idx_labels(std::span<const std::uint8_t> blob) {
    const std::uint32_t magic = read_be32(blob, 0);
    if (magic != kLabelsMagic) {
        throw FormatError("idx labels: bad magic " + std::to_string(magic) +
                          ", expected " + std::to_string(kLabelsMagic));
    }
    const std::size_t count = read_be32(blob, 4);
    if (blob.size() < 8 + count) throw FormatError("idx labels: truncated payload");
    if (blob.size() > 8 + count) throw FormatError("idx labels: trailing bytes");
    return {blob.begin() + 8, blob.end()};
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    push_be32(out, kLabelsMagic);
    push_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

Dataset dataset_from_idx(const IdxImages& images, std::span<const std::uint8_t> labels) {
    if (images.count != labels.size()) {
        throw FormatError("idx: " + std::to_string(images.count) + " images but " +
                          std::to_string(labels.size()) + " labels");
    }
    Dataset ds;
    ds.dim = images.rows * images.cols;
    ds.num_classes = 10;
    ds.meta = "idx(" + std::to_string(images.rows) + "x" + std::to_string(images.cols) + ")";
    ds.samples.resize(images.pixels.size());
    for (std::size_t i = 0; i < images.pixels.size(); ++i) {
        ds.samples[i] = static_cast<double>(images.pixels[i]) / 127.5 - 1.0;
    }
    ds.labels.assign(labels.begin(), labels.end());
    ds.validate();
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto images = decode_idx_images(read_file(images_path));
    const auto labels = decode_idx_labels(read_file(labels_path));
    return dataset_from_idx(images, labels);
}

Dataset balanced_subset(const Dataset& ds, std::size_t per_class, Rng& rng) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
        if (by_class[c].size() < per_class) {
            throw DomainError("balanced subset: class " + std::to_string(c) + " has only " +
                              std::to_string(by_class[c].size()) + " members, need " +
                              std::to_string(per_class));
        }
    }
    // Partial Fisher-Yates per class, then a global shuffle.
    std::vector<std::size_t> chosen;
    chosen.reserve(per_class * ds.num_classes);
    for (auto& pool : by_class) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t j = i + rng.next_u64() % (pool.size() - i);
            std::swap(pool[i], pool[j]);
            chosen.push_back(pool[i]);
        }
    }
    for (std::size_t i = chosen.size(); i > 1; --i) {
        std::swap(chosen[i - 1], chosen[rng.next_u64() % i]);
    }
    Dataset out;
    out.dim = ds.dim;
    out.num_classes = ds.num_classes;
    out.meta = ds.meta + " subset(" + std::to_string(per_class) + "/class)";
    out.samples.reserve(chosen.size() * ds.dim);
    out.labels.reserve(chosen.size());
    for (auto idx : chosen) {
        auto r = ds.row(idx);
        out.samples.insert(out.samples.end(), r.begin(), r.end());
        out.labels.push_back(ds.labels[idx]);
    }
    out.validate();
    return out;
}

Dataset downsample(const Dataset& ds, std::size_t from_side, std::size_t to_side) {
    if (ds.dim != from_side * from_side) {
        throw ContractError("downsample: data dim " + std::to_string(ds.dim) +
                            " is not " + std::to_string(from_side) + "^2");
    }
    if (to_side == 0 || to_side > from_side) {
        throw DomainError("downsample: target side must be in [1, from_side]");
    }
    const std::size_t block = from_side / to_side;
    const std::size_t used = block * to_side;      // center crop to this many pixels
    const std::size_t off = (from_side - used) / 2;
    Dataset out;
    out.dim = to_side * to_side;
    out.num_classes = ds.num_classes;
    out.labels = ds.labels;
    out.meta = ds.meta + " down(" + std::to_string(to_side) + ")";
    out.samples.resize(ds.size() * out.dim);
    const double inv = 1.0 / static_cast<double>(block * block);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto src = ds.row(i);
        double* dst = out.samples.data() + i * out.dim;
        for (std::size_t br = 0; br < to_side; ++br) {
            for (std::size_t bc = 0; bc < to_side; ++bc) {
                double acc = 0.0;
                for (std::size_t r = 0; r < block; ++r) {
                    for (std::size_t c = 0; c < block; ++c) {
                        acc += src[(off + br * block + r) * from_side + off + bc * block + c];
                    }
                }
                dst[br * to_side + bc] = acc * inv;
            }
        }
    }
    out.validate();
    return out;
}

void write_csv(const Dataset& ds, std::ostream& os) {
    os << "label";
    for (std::size_t j = 0; j < ds.dim; ++j) os << ",x" << j;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.labels[i];
        auto r = ds.row(i);
        for (double v : r) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << "," << buf;
        }
        os << "\n";
    }
}

}  // namespace tgan::data
