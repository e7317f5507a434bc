#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tgan/common.hpp"

namespace tgan::data {

// Immutable once constructed; validate() is called by every producer.
struct Dataset {
    std::size_t dim = 0;
    std::size_t num_classes = 1;
    std::vector<double> samples;  // n x dim row-major, all entries in [-1, 1]
    std::vector<std::size_t> labels;
    std::string meta;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return {samples.data() + i * dim, dim};
    }
    std::vector<std::size_t> class_counts() const;
    void validate() const;
};

struct RingSpec {
    std::size_t modes = 8;
    double radius = 1.0;
    double stddev = 0.05;
    std::size_t n = 500;
    bool labeled = true;
};

// k Gaussians on a circle, rescaled into [-1,1]^2. Mode assignment is
// multinomial-uniform; label = mode index when labeled.
Dataset ring_of_gaussians(const RingSpec& spec, Rng& rng);

// Centers and per-mode std after the same rescale, for evaluation.
std::vector<double> ring_centers(const RingSpec& spec);  // modes x 2
double ring_scaled_std(const RingSpec& spec);

// IDX containers (big-endian, magic 2051 for u8 images, 2049 for u8 labels).
struct IdxImages {
    std::size_t count = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;
};

IdxImages decode_idx_images(std::span<const std::uint8_t> blob);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> decode_idx_labels(std::span<const std::uint8_t> blob);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

// Pixels map linearly onto [-1, 1]: v / 127.5 - 1.
Dataset dataset_from_idx(const IdxImages& images, std::span<const std::uint8_t> labels);
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Exactly per_class examples of every class, sampled without replacement.
Dataset balanced_subset(const Dataset& ds, std::size_t per_class, Rng& rng);

// Block-mean pooling from from_side^2 to to_side^2, with a center crop to
// the nearest multiple of to_side when it does not divide evenly.
Dataset downsample(const Dataset& ds, std::size_t from_side, std::size_t to_side);

// Header row "label,x0,...,x{d-1}".
void write_csv(const Dataset& ds, std::ostream& os);

}  // namespace tgan::data
