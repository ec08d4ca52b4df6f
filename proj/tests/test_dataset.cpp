#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "sharplab/dataset.hpp"
#include "sharplab/error.hpp"

using namespace sharplab;

TEST(Generate, ZeroNoiseBlobsSitOnCentres) {
    const auto d = generate_dataset(DatasetKind::blobs, 4, 0.0, 123);
    ASSERT_EQ(d.size(), 4u);
    int per_class[2] = {0, 0};
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double c = d.targets[i] == 0 ? -1.0 : 1.0;
        EXPECT_EQ(d.row(i)[0], c);
        EXPECT_EQ(d.row(i)[1], c);
        ++per_class[d.targets[i]];
    }
    EXPECT_EQ(per_class[0], 2);
    EXPECT_EQ(per_class[1], 2);
}

TEST(Generate, SameSeedSameBytes) {
    for (auto kind : {DatasetKind::blobs, DatasetKind::moons, DatasetKind::xor_}) {
        std::ostringstream a, b;
        write_dataset(a, generate_dataset(kind, 101, 0.2, 5));
        write_dataset(b, generate_dataset(kind, 101, 0.2, 5));
        EXPECT_EQ(a.str(), b.str());
        EXPECT_NE(generate_dataset(kind, 101, 0.2, 5), generate_dataset(kind, 101, 0.2, 6));
    }
}

TEST(Generate, MoonsChecksumIsPinned) {
    const auto d = generate_dataset(DatasetKind::moons, 200, 0.1, 7);
    EXPECT_EQ(dataset_checksum(d), 15763511054611579831ull);
}

TEST(Generate, RejectsTooFewRows) {
    EXPECT_THROW(generate_dataset(DatasetKind::moons, 1, 0.1, 0), ConfigError);
    EXPECT_THROW(generate_dataset(DatasetKind::moons, 10, -1.0, 0), ConfigError);
    EXPECT_THROW(parse_dataset_kind("spirals"), ConfigError);
}

TEST(Generate, XorLabelsFollowQuadrant) {
    const auto d = generate_dataset(DatasetKind::xor_, 200, 0.0, 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const bool same_sign = (d.row(i)[0] > 0) == (d.row(i)[1] > 0);
        EXPECT_EQ(d.targets[i], same_sign ? 0 : 1);
    }
}

TEST(Batches, SizesFollowArithmetic) {
    const auto d = generate_dataset(DatasetKind::blobs, 10, 0.1, 0);
    const auto batches = make_batches(d, 3, 1, 0);
    ASSERT_EQ(batches.size(), 4u);
    EXPECT_EQ(batches[0].size(), 3u);
    EXPECT_EQ(batches[1].size(), 3u);
    EXPECT_EQ(batches[2].size(), 3u);
    EXPECT_EQ(batches[3].size(), 1u);
}

TEST(Batches, EpochIsAPartition) {
    const auto d = generate_dataset(DatasetKind::moons, 57, 0.1, 0);
    std::multiset<std::size_t> seen;
    for (const auto& b : make_batches(d, 8, 4, 2)) {
        b.validate();
        for (std::size_t k = 0; k < b.size(); ++k) {
            seen.insert(b.indices[k]);
            EXPECT_EQ(b.targets[k], d.targets[b.indices[k]]);
            EXPECT_EQ(b.row(k)[0], d.row(b.indices[k])[0]);
        }
    }
    std::multiset<std::size_t> all;
    for (std::size_t i = 0; i < 57; ++i) all.insert(i);
    EXPECT_EQ(seen, all);
}

TEST(Batches, PermutationDeterministicPerEpoch) {
    EXPECT_EQ(epoch_permutation(100, 9, 3), epoch_permutation(100, 9, 3));
    EXPECT_NE(epoch_permutation(100, 9, 3), epoch_permutation(100, 9, 4));
    auto p = epoch_permutation(100, 9, 3);
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> iota(100);
    std::iota(iota.begin(), iota.end(), std::size_t{0});
    EXPECT_EQ(p, iota);
}

TEST(Batches, RejectsBadSize) {
    const auto d = generate_dataset(DatasetKind::blobs, 10, 0.1, 0);
    EXPECT_THROW(make_batches(d, 0, 0, 0), ConfigError);
    EXPECT_THROW(make_batches(d, 11, 0, 0), ConfigError);
}

TEST(Batches, MismatchedRowsRejected) {
    Batch b;
    b.dim = 2;
    b.inputs = {1, 2, 3, 4};
    b.targets = {0};
    b.indices = {0};
    EXPECT_THROW(b.validate(), ConfigError);
}

TEST(Split, EightyTwentyAndDisjoint) {
    const auto d = generate_dataset(DatasetKind::moons, 2000, 0.2, 0);
    const auto [train, test] = split_dataset(d, 0.8, 0);
    EXPECT_EQ(train.size(), 1600u);
    EXPECT_EQ(test.size(), 400u);
    const auto [train2, test2] = split_dataset(d, 0.8, 0);
    EXPECT_EQ(train, train2);
    EXPECT_EQ(test, test2);
    EXPECT_THROW(split_dataset(d, 1.0, 0), ConfigError);
}

TEST(Format, RoundTripIsExact) {
    const auto d = generate_dataset(DatasetKind::moons, 77, 0.3, 2);
    std::stringstream s;
    write_dataset(s, d);
    EXPECT_EQ(read_dataset(s), d);
}

TEST(Format, RejectsCorruptFiles) {
    const auto d = generate_dataset(DatasetKind::blobs, 6, 0.3, 2);
    std::ostringstream s;
    write_dataset(s, d);
    const std::string good = s.str();

    std::istringstream no_magic("SHRPDS2\n" + good.substr(good.find('\n') + 1));
    EXPECT_THROW(read_dataset(no_magic), ConfigError);
    std::istringstream truncated(good.substr(0, good.size() - 5));
    EXPECT_THROW(read_dataset(truncated), ConfigError);
    std::string bad = good;
    bad.replace(bad.find("rows\n") + 5, 1, "x");
    std::istringstream garbled(bad);
    EXPECT_THROW(read_dataset(garbled), ConfigError);

    // Last field of the first row is the label; 7 is outside two classes.
    std::string label = good;
    const auto row_end = label.find('\n', label.find("rows\n") + 5);
    label[row_end - 1] = '7';
    std::istringstream bad_label(label);
    EXPECT_THROW(read_dataset(bad_label), ConfigError);
}
