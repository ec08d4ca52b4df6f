#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sharplab {

enum class DatasetKind { blobs, moons, xor_ };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

/// Labelled 2-D classification data. Inputs are row-major (n x dim).
struct Dataset {
    DatasetKind kind = DatasetKind::blobs;
    std::uint64_t seed = 0;
    double noise = 0.0;
    std::size_t dim = 2;
    std::size_t num_classes = 2;
    std::vector<double> inputs;
    std::vector<int> targets;

    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * dim, dim}; }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A mini-batch. `indices` name the source rows in the dataset it was drawn from.
struct Batch {
    std::size_t dim = 0;
    std::vector<double> inputs;
    std::vector<int> targets;
    std::vector<std::size_t> indices;

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * dim, dim}; }

    /// Throws ConfigError if row counts disagree.
    void validate() const;
};

Batch gather(const Dataset& data, std::span<const std::size_t> rows);
Batch full_batch(const Dataset& data);

/// Two balanced classes. Blobs sit at (-1,-1) and (+1,+1); moons are the two
/// interleaved half circles; xor labels the four quadrants by sign product.
Dataset generate_dataset(DatasetKind kind, std::size_t n, double noise, std::uint64_t seed);

/// Seeded permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Every example exactly once, in the (seed, epoch) permutation order; last batch may be short.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::size_t epoch);

/// Seeded disjoint split; the first part receives round(train_fraction * n) rows.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed);

/// FNV-1a over the bit patterns of every input and target.
std::uint64_t dataset_checksum(const Dataset& data);

// SHRPDS1 text container; see docs/dataset_format.md.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace sharplab
