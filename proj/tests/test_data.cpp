#include <scd/data.hpp>
#include <scd/metrics.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"

namespace fs = std::filesystem;
using scd::SamplePair;
using scd::Tensor;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("scd_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_sample(const fs::path& root, const std::string& id, const SamplePair<double>& s) {
    fs::create_directories(root / id);
    scd::write_png((root / id / "t1.png").string(), *s.t1);
    scd::write_png((root / id / "t2.png").string(), *s.t2);
    scd::write_png((root / id / "label.png").string(), *s.label);
}

}  // namespace

TEST(Synth, DeterministicPerSeedAndIndex) {
    auto a = scd::synth_generate<double>(7, 3, 32, 32, 0.1);
    auto b = scd::synth_generate<double>(7, 3, 32, 32, 0.1);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a[i].t1->data, b[i].t1->data);
        EXPECT_EQ(a[i].t2->data, b[i].t2->data);
        EXPECT_EQ(a[i].label->data, b[i].label->data);
    }
    auto c = scd::synth_generate<double>(8, 1, 32, 32, 0.1);
    EXPECT_NE(a[0].t1->data, c[0].t1->data);

    // Sample k depends on (seed, k) alone: a longer run reproduces the prefix.
    auto longer = scd::synth_generate<double>(7, 5, 32, 32, 0.1);
    EXPECT_EQ(longer[2].t2->data, a[2].t2->data);
}

TEST(Synth, RealizedDensityNearTarget) {
    const double target = 0.1;
    auto samples = scd::synth_generate<double>(3, 30, 64, 64, target);
    double total = 0.0;
    for (const auto& s : samples) {
        double pos = 0;
        for (double v : s.label->data) pos += v;
        total += pos / double(s.label->numel());
    }
    const double mean_density = total / samples.size();
    EXPECT_GE(mean_density, 0.05);
    EXPECT_LE(mean_density, 0.15);
}

TEST(Synth, LabelMatchesGeometryRecords) {
    std::vector<scd::SynthRecord> records;
    auto samples = scd::synth_generate<double>(11, 4, 48, 48, 0.12, &records);
    ASSERT_EQ(records.size(), samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        std::vector<std::uint8_t> mask(48 * 48, 0);
        for (const auto& shape : records[k].change_shapes) scd::detail::rasterize_into(shape, mask, 48, 48);
        for (std::size_t i = 0; i < mask.size(); ++i)
            ASSERT_EQ(double(mask[i]), samples[k].label->data[i]) << "sample " << k << " pixel " << i;
    }
}

TEST(Synth, PerfectDetectorScoresOne) {
    auto samples = scd::synth_generate<double>(5, 2, 40, 40, 0.15);
    for (const auto& s : samples) {
        auto c = scd::confusion(s.label, s.label);
        auto sc = scd::scores(c);
        ASSERT_TRUE(sc.positives_defined);
        EXPECT_DOUBLE_EQ(sc.f1, 1.0);
    }
}

TEST(Synth, ChangedPixelsActuallyDiffer) {
    // Labelled pixels must differ by more than the noise floor, unlabelled by
    // at most it (2% noise, wiggle for 8-bit-nothing — these stay float).
    auto samples = scd::synth_generate<double>(9, 3, 48, 48, 0.1);
    for (const auto& s : samples) {
        const int hw = 48 * 48;
        for (int i = 0; i < hw; ++i) {
            double max_cdiff = 0.0;
            for (int c = 0; c < 3; ++c)
                max_cdiff = std::max(max_cdiff, std::abs(s.t1->data[c * hw + i] - s.t2->data[c * hw + i]));
            if (s.label->data[i] > 0.5)
                EXPECT_GT(max_cdiff, 0.05) << "labelled pixel " << i << " barely changed";
            else
                EXPECT_LE(max_cdiff, 0.021) << "unlabelled pixel " << i << " changed";
        }
    }
}

TEST(LoadDataset, RoundTripThroughPng) {
    TempDir dir("load_roundtrip");
    auto samples = scd::synth_generate<double>(2, 3, 24, 24, 0.1);
    for (const auto& s : samples) write_sample(dir.path, s.id, s);

    auto loaded = scd::load_dataset<double>(dir.path);
    ASSERT_EQ(loaded.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(loaded[i].id, samples[i].id);
        ASSERT_EQ(loaded[i].t1->shape, samples[i].t1->shape);
        // 8-bit quantization: half a step of 1/255.
        EXPECT_LT(oracle::max_abs_diff(loaded[i].t1->data, samples[i].t1->data), 0.5 / 255.0 + 1e-9);
        EXPECT_EQ(loaded[i].label->data, samples[i].label->data);  // binary survives exactly
    }
}

TEST(LoadDataset, BinarizesNonzeroLabels) {
    TempDir dir("load_binarize");
    auto s = scd::synth_generate<double>(1, 1, 16, 16, 0.2)[0];
    // Label written as 0/255 gray by write_png; loader must map to {0,1}.
    write_sample(dir.path, "a", s);
    auto loaded = scd::load_sample<double>(dir.path, "a");
    for (double v : loaded.label->data) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(LoadDataset, ErrorsNameTheOffendingId) {
    TempDir dir("load_errors");
    auto s = scd::synth_generate<double>(1, 1, 16, 16, 0.2)[0];
    write_sample(dir.path, "broken", s);
    fs::remove(dir.path / "broken" / "label.png");
    try {
        scd::load_sample<double>(dir.path, "broken");
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
    }

    // Size mismatch: label smaller than the images.
    auto small = scd::synth_generate<double>(1, 1, 8, 8, 0.2)[0];
    write_sample(dir.path, "skewed", s);
    scd::write_png((dir.path / "skewed" / "label.png").string(), *small.label);
    try {
        scd::load_sample<double>(dir.path, "skewed");
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("skewed"), std::string::npos);
    }
}

TEST(LoadDataset, ScdtDropInsWork) {
    TempDir dir("load_scdt");
    auto s = scd::synth_generate<double>(4, 1, 16, 16, 0.2)[0];
    fs::create_directories(dir.path / "m");
    scd::write_tensor((dir.path / "m" / "t1.scdt").string(), *s.t1);
    scd::write_tensor((dir.path / "m" / "t2.scdt").string(), *s.t2);
    scd::write_tensor((dir.path / "m" / "label.scdt").string(), *s.label);
    auto loaded = scd::load_sample<double>(dir.path, "m");
    EXPECT_EQ(loaded.t1->shape, s.t1->shape);
    EXPECT_LT(oracle::max_abs_diff(loaded.t1->data, s.t1->data), 1e-7);  // float32 payload
}

TEST(LoadSplit, ManifestsDefineDisjointSplits) {
    TempDir dir("split");
    auto samples = scd::synth_generate<double>(6, 4, 16, 16, 0.1);
    for (const auto& s : samples) write_sample(dir.path, s.id, s);
    std::ofstream(dir.path / "train.txt") << "synth0\nsynth1\nsynth2\n";
    std::ofstream(dir.path / "test.txt") << "synth3\n";
    auto split = scd::load_split<double>(dir.path);
    EXPECT_EQ(split.train.size(), 3u);
    EXPECT_EQ(split.test.size(), 1u);
    EXPECT_EQ(split.test[0].id, "synth3");

    std::ofstream(dir.path / "test.txt") << "synth1\n";  // overlaps train
    EXPECT_THROW(scd::load_split<double>(dir.path), std::runtime_error);
}

TEST(Patches, ExactTilingAndIdentity) {
    auto pair = scd::synth_generate<double>(13, 1, 224, 224, 0.1)[0];
    auto patches = scd::extract_patches(pair, 112, 112, 112, 112);
    ASSERT_EQ(patches.size(), 4u);

    // Disjoint exact tiling: stitching the four quadrants back reproduces the
    // original bit for bit.
    auto stitched = Tensor<double>::create({3, 224, 224});
    int idx = 0;
    for (int y0 : {0, 112})
        for (int x0 : {0, 112}) {
            const auto& p = patches[idx++];
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 112; ++y)
                    for (int x = 0; x < 112; ++x)
                        stitched->data[(std::size_t(c) * 224 + y0 + y) * 224 + x0 + x] =
                            p.t1->data[(std::size_t(c) * 112 + y) * 112 + x];
        }
    EXPECT_EQ(stitched->data, pair.t1->data);

    auto single = scd::extract_patches(pair, 224, 224, 224, 224);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].t1->data, pair.t1->data);
    EXPECT_EQ(single[0].label->data, pair.label->data);

    EXPECT_THROW(scd::extract_patches(pair, 300, 300, 1, 1), std::invalid_argument);
}

TEST(Patches, FlushFinalPatchCoversTrailingEdge) {
    auto pair = scd::synth_generate<double>(14, 1, 100, 90, 0.1)[0];
    auto patches = scd::extract_patches(pair, 64, 64, 64, 64);
    // starts: y in {0, 36}, x in {0, 26} -> 4 patches, trailing edges covered
    ASSERT_EQ(patches.size(), 4u);
    std::vector<std::uint8_t> covered(100 * 90, 0);
    for (const auto& p : patches) {
        const auto pos = p.id.find("_y");
        const int y0 = std::stoi(p.id.substr(pos + 2));
        const int x0 = std::stoi(p.id.substr(p.id.find('x', pos) + 1));
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) covered[std::size_t(y0 + y) * 90 + x0 + x] = 1;
    }
    EXPECT_EQ(std::count(covered.begin(), covered.end(), 0), 0);
}

TEST(Resize, IdentityConstantAndBinary) {
    auto gen = oracle::rng(91);
    auto img = oracle::random_tensor({3, 12, 17}, gen, false, 0.0, 1.0);
    auto same_b = scd::resize(*img, 12, 17, scd::ResizeMode::Bilinear);
    auto same_n = scd::resize(*img, 12, 17, scd::ResizeMode::Nearest);
    EXPECT_EQ(same_b->data, img->data);
    EXPECT_EQ(same_n->data, img->data);

    auto flat = Tensor<double>::full({1, 9, 9}, 0.37);
    auto up = scd::resize(*flat, 21, 5, scd::ResizeMode::Bilinear);
    for (double v : up->data) EXPECT_NEAR(v, 0.37, 1e-12);

    auto label = scd::synth_generate<double>(15, 1, 64, 64, 0.2)[0].label;
    auto shrunk = scd::resize(*label, 16, 16, scd::ResizeMode::Nearest);
    for (double v : shrunk->data) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Resize, CornerAlignedBilinearValues) {
    // 1-D ramp 0..2 widened from 3 to 5 samples: corner-aligned midpoints.
    auto ramp = Tensor<double>::from_data({1, 1, 3}, {0.0, 1.0, 2.0});
    auto wide = scd::resize(*ramp, 1, 5, scd::ResizeMode::Bilinear);
    const double expect[5] = {0.0, 0.5, 1.0, 1.5, 2.0};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(wide->data[i], expect[i], 1e-12);
}
