#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "biplate/forward.hpp"
#include "biplate/io.hpp"

using namespace biplate;
using namespace biplate::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("biplate_io_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(p);
    return p;
}

CauchyDataset small_dataset(const SourceField& f) {
    return forward::synthesize_dataset(f, SphereGrid::make(1.0, 32, SphereRule::GaussProduct),
                                       FrequencyGrid::sqrt_spaced(0.5, 4.0, 4), 0.5, {source_hash(f), 7, 0.0});
}

}  // namespace

TEST(Hash, Fnv1aReferenceVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(AtomicWrite, CreatesParentsAndLeavesNoTemporaries) {
    const auto dir = scratch("atomic");
    atomic_write(dir / "a" / "b.txt", "hello");
    atomic_write(dir / "a" / "b.txt", "world");
    EXPECT_EQ(read_file(dir / "a" / "b.txt"), "world");
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) (void)e, ++n;
    EXPECT_EQ(n, 1u);
    EXPECT_THROW(read_file(dir / "missing"), ValidationError);
    fs::remove_all(dir);
}

TEST(Csv, LayoutAndBody) {
    CsvTable t({{"sigma", "1"}, {"status", "-"}});
    t.add_meta("config_hash", "abc");
    t.add_row({fmt_double(0.5), "ok"});
    const auto r = t.render("2026-01-01T00:00:00Z");
    EXPECT_EQ(r, "# biplate 0.1.0 written 2026-01-01T00:00:00Z\n# config_hash: abc\nsigma [1],status [-]\n"
                 "5.000000000000e-01,ok\n");
    EXPECT_EQ(csv_body(r), t.body());
    EXPECT_EQ(csv_body(t.render("other")), t.body());
    EXPECT_THROW(t.add_row({"1"}), std::logic_error);
}

TEST(Csv, NonFiniteFormatting) {
    EXPECT_EQ(fmt_double(std::nan("")), "nan");
    EXPECT_EQ(fmt_double(INFINITY), "inf");
    EXPECT_EQ(fmt_double(-INFINITY), "-inf");
    EXPECT_EQ(fmt_double(-1.0), "-1.000000000000e+00");
}

TEST(Manifest, JsonRoundTripIsByteIdentical) {
    DatasetManifest m;
    m.kind = "cauchy_dataset";
    m.geometry = {1.0, 0.7, 16, 0.5, "gauss", 32, 0.5, 4.0, 3, "sqrt"};
    m.frequencies = {0.5, 1.0 / 3.0, 4.0};
    m.smoothness = 4;
    m.arrays.push_back({"u", {3, 32}, DType::C128, 0, 3 * 32 * 16});
    m.provenance = {"0123456789abcdef", 99, 0.01, "fedcba9876543210", kToolVersion};
    const auto a = manifest_to_json(m);
    const auto back = manifest_from_json(a);
    EXPECT_EQ(manifest_to_json(back), a);
    EXPECT_EQ(back.frequencies[1], 1.0 / 3.0);
    EXPECT_EQ(back.arrays[0].dtype, DType::C128);
}

TEST(Manifest, RejectsBadDocuments) {
    EXPECT_THROW(manifest_from_json("{"), ValidationError);
    EXPECT_THROW(manifest_from_json("{\"schema_version\": 1}"), ValidationError);
    DatasetManifest m;
    m.kind = "cauchy_dataset";
    m.schema_version = 99;
    EXPECT_THROW(manifest_from_json(manifest_to_json(m)), ValidationError);
}

TEST(Dataset, WriteReadWriteIsBitIdentical) {
    const auto f = make_source_field({GaussianBump{{0.1, 0.0, 0.0}, 0.1, 1.0}}, 8, 0.7);
    const auto ds = small_dataset(f);
    const auto d1 = scratch("ds1"), d2 = scratch("ds2");
    write_dataset(d1, ds, f, dataset_manifest(ds, 0.7, 8, f.smoothness(), 0.5, 4.0, FrequencySpacing::Sqrt), false);
    const auto back = read_dataset(d1);
    write_dataset(d2, back.dataset, back.truth, back.manifest, false);
    EXPECT_EQ(read_file(d1 / "manifest.json"), read_file(d2 / "manifest.json"));
    EXPECT_EQ(read_file(d1 / "arrays.bin"), read_file(d2 / "arrays.bin"));
    ASSERT_TRUE(back.truth.has_value());
    EXPECT_EQ(back.truth->values(), f.values());
    for (std::size_t j = 0; j < ds.traces.size(); ++j) {
        EXPECT_EQ(back.dataset.traces[j].u, ds.traces[j].u);
        EXPECT_EQ(back.dataset.traces[j].grad_lap_u, ds.traces[j].grad_lap_u);
        EXPECT_EQ(back.dataset.traces[j].k, ds.traces[j].k);
    }
    EXPECT_EQ(back.dataset.provenance.seed, 7u);
    EXPECT_EQ(back.dataset.sphere.points(), ds.sphere.points());
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Dataset, DescriptorsTileThePayload) {
    const auto f = make_source_field({}, 4, 0.7);
    const auto ds = small_dataset(f);
    const auto dir = scratch("tile");
    write_dataset(dir, ds, std::nullopt, dataset_manifest(ds, 0.7, 4, 0, 0.5, 4.0, FrequencySpacing::Sqrt), false);
    const auto ad = read_array_dir(dir);
    std::uint64_t off = 0;
    for (const auto& a : ad.manifest.arrays) {
        EXPECT_EQ(a.offset, off);
        EXPECT_EQ(a.bytes, a.element_count() * dtype_size(a.dtype));
        off += a.bytes;
    }
    EXPECT_EQ(off, ad.payload.size());
    EXPECT_EQ(ad.manifest.find("source"), nullptr);
    fs::remove_all(dir);
}

TEST(Dataset, RefusesOverwriteWithoutForce) {
    const auto f = make_source_field({}, 4, 0.7);
    const auto ds = small_dataset(f);
    const auto dir = scratch("force");
    const auto m = dataset_manifest(ds, 0.7, 4, 0, 0.5, 4.0, FrequencySpacing::Sqrt);
    write_dataset(dir, ds, std::nullopt, m, false);
    EXPECT_THROW(write_dataset(dir, ds, std::nullopt, m, false), ValidationError);
    EXPECT_NO_THROW(write_dataset(dir, ds, std::nullopt, m, true));
    fs::remove_all(dir);
}

TEST(Dataset, CorruptedPayloadsNameTheArray) {
    const auto f = make_source_field({GaussianBump{{0.1, 0.0, 0.0}, 0.1, 1.0}}, 8, 0.7);
    const auto ds = small_dataset(f);
    const auto dir = scratch("corrupt");
    write_dataset(dir, ds, f, dataset_manifest(ds, 0.7, 8, f.smoothness(), 0.5, 4.0, FrequencySpacing::Sqrt), false);
    const auto payload = read_file(dir / "arrays.bin");

    // Truncated: the last array runs past the end.
    atomic_write(dir / "arrays.bin", payload.substr(0, payload.size() - 100));
    try {
        read_dataset(dir);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("array 'source'"), std::string::npos) << e.what();
    }

    // Trailing bytes.
    atomic_write(dir / "arrays.bin", payload + "xx");
    EXPECT_THROW(read_dataset(dir), ValidationError);

    // Shape that disagrees with the geometry.
    atomic_write(dir / "arrays.bin", payload);
    auto m = manifest_from_json(read_file(dir / "manifest.json"));
    m.geometry.n_sphere = 31;
    atomic_write(dir / "manifest.json", manifest_to_json(m));
    try {
        read_dataset(dir);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("array '"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(Field, WriteAndReadBack) {
    const auto f = make_source_field({GaussianBump{{0.0, 0.0, 0.0}, 0.1, 1.0}}, 6, 0.7);
    const auto dir = scratch("field");
    write_field(dir, f, DatasetManifest{}, false);
    const auto ad = read_array_dir(dir);
    EXPECT_EQ(ad.manifest.kind, "reconstruction");
    EXPECT_EQ(ad.array("f_rec"), f.values());
    EXPECT_THROW(ad.array("nope"), ValidationError);
    EXPECT_THROW(read_dataset(dir), ValidationError);
    fs::remove_all(dir);
}
