#include "sharplab/dataset.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/random.hpp"

namespace sharplab {

namespace {

constexpr std::string_view kMagic = "SHRPDS1";

// Sub-stream ids for derive_seed.
constexpr std::uint64_t kGenerateStream = 11;
constexpr std::uint64_t kShuffleStream = 23;
constexpr std::uint64_t kSplitStream = 37;

}  // namespace

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::blobs: return "blobs";
        case DatasetKind::moons: return "moons";
        case DatasetKind::xor_: return "xor";
    }
    return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "blobs") return DatasetKind::blobs;
    if (name == "moons") return DatasetKind::moons;
    if (name == "xor") return DatasetKind::xor_;
    throw ConfigError("unknown dataset kind '" + name + "'");
}

void Batch::validate() const {
    if (inputs.size() != targets.size() * dim || indices.size() != targets.size())
        throw ConfigError("Batch: row counts of inputs, targets and indices disagree");
}

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
    Batch b;
    b.dim = data.dim;
    b.inputs.reserve(rows.size() * data.dim);
    b.targets.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= data.size()) throw ConfigError("gather: row index out of range");
        auto x = data.row(r);
        b.inputs.insert(b.inputs.end(), x.begin(), x.end());
        b.targets.push_back(data.targets[r]);
    }
    b.indices.assign(rows.begin(), rows.end());
    return b;
}

Batch full_batch(const Dataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return gather(data, rows);
}

Dataset generate_dataset(DatasetKind kind, std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw ConfigError("generate_dataset: need at least one example per class (n >= 2)");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("generate_dataset: noise must be >= 0");

    Dataset d;
    d.kind = kind;
    d.seed = seed;
    d.noise = noise;
    d.dim = 2;
    d.num_classes = 2;
    d.inputs.reserve(2 * n);
    d.targets.reserve(n);

    Rng rng(derive_seed(seed, kGenerateStream));
    const std::size_t per_class[2] = {(n + 1) / 2, n / 2};

    for (int cls = 0; cls < 2; ++cls) {
        const std::size_t count = per_class[cls];
        for (std::size_t k = 0; k < count; ++k) {
            double x = 0.0;
            double y = 0.0;
            switch (kind) {
                case DatasetKind::blobs:
                    x = y = cls == 0 ? -1.0 : 1.0;
                    break;
                case DatasetKind::moons: {
                    const double t = count > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
                    if (cls == 0) {
                        x = std::cos(t);
                        y = std::sin(t);
                    } else {
                        x = 1.0 - std::cos(t);
                        y = 0.5 - std::sin(t);
                    }
                    break;
                }
                case DatasetKind::xor_: {
                    const double ax = rng.uniform(0.1, 1.0);
                    const double ay = rng.uniform(0.1, 1.0);
                    const bool flip = rng.uniform() < 0.5;
                    // class 0: same-sign quadrants, class 1: opposite-sign quadrants
                    const double sx = flip ? -1.0 : 1.0;
                    const double sy = (cls == 0) ? sx : -sx;
                    x = sx * ax;
                    y = sy * ay;
                    break;
                }
            }
            if (noise > 0.0) {
                x += noise * rng.normal();
                y += noise * rng.normal();
            }
            d.inputs.push_back(x);
            d.inputs.push_back(y);
            d.targets.push_back(cls);
        }
    }
    return d;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
    rng.shuffle(std::span<std::size_t>(perm));
    return perm;
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::size_t epoch) {
    if (batch_size < 1 || batch_size > data.size())
        throw ConfigError("make_batches: batch_size must lie in [1, n]");
    const auto perm = epoch_permutation(data.size(), seed, epoch);
    std::vector<Batch> out;
    for (std::size_t start = 0; start < perm.size(); start += batch_size) {
        const std::size_t len = std::min(batch_size, perm.size() - start);
        out.push_back(gather(data, std::span<const std::size_t>(perm).subspan(start, len)));
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split_dataset: fraction must lie in (0, 1)");
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, kSplitStream));
    rng.shuffle(std::span<std::size_t>(perm));

    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
    if (n_train == 0 || n_train == data.size()) throw ConfigError("split_dataset: a split would be empty");

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset part = data;
        part.inputs.clear();
        part.targets.clear();
        for (std::size_t k = begin; k < end; ++k) {
            auto x = data.row(perm[k]);
            part.inputs.insert(part.inputs.end(), x.begin(), x.end());
            part.targets.push_back(data.targets[perm[k]]);
        }
        return part;
    };
    return {take(0, n_train), take(n_train, data.size())};
}

std::uint64_t dataset_checksum(const Dataset& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t word) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (word >> (8 * byte)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (double x : data.inputs) mix(std::bit_cast<std::uint64_t>(x));
    for (int t : data.targets) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(t)));
    return h;
}

void write_dataset(std::ostream& out, const Dataset& data) {
    out << kMagic << '\n'
        << "kind " << to_string(data.kind) << '\n'
        << "seed " << data.seed << '\n'
        << "noise " << format_real(data.noise) << '\n'
        << "n " << data.size() << '\n'
        << "dim " << data.dim << '\n'
        << "classes " << data.num_classes << '\n'
        << "rows\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double x : data.row(i)) out << format_real(x) << ' ';
        out << data.targets[i] << '\n';
    }
    out << "end\n";
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw ConfigError("dataset: missing SHRPDS1 header");

    auto field = [&](std::string_view key) {
        if (!std::getline(in, line)) throw ConfigError("dataset: truncated header");
        const auto parts = split(line, ' ');
        if (parts.size() != 2 || parts[0] != key) throw ConfigError("dataset: expected '" + std::string(key) + "'");
        return parts[1];
    };

    Dataset d;
    d.kind = parse_dataset_kind(field("kind"));
    d.seed = std::stoull(field("seed"));
    d.noise = parse_real(field("noise"));
    const std::size_t n = std::stoull(field("n"));
    d.dim = std::stoull(field("dim"));
    d.num_classes = std::stoull(field("classes"));
    if (!std::getline(in, line) || line != "rows") throw ConfigError("dataset: expected 'rows'");

    d.inputs.reserve(n * d.dim);
    d.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw ConfigError("dataset: truncated rows");
        const auto parts = split(line, ' ');
        if (parts.size() != d.dim + 1) throw ConfigError("dataset: bad row width at row " + std::to_string(i));
        for (std::size_t c = 0; c < d.dim; ++c) d.inputs.push_back(parse_real(parts[c]));
        const int label = std::stoi(parts[d.dim]);
        if (label < 0 || static_cast<std::size_t>(label) >= d.num_classes)
            throw ConfigError("dataset: label out of range at row " + std::to_string(i));
        d.targets.push_back(label);
    }
    if (!std::getline(in, line) || line != "end") throw ConfigError("dataset: missing 'end' marker");
    return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    write_dataset(out, data);
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    return read_dataset(in);
}

}  // namespace sharplab
