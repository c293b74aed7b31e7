#pragma once

// On-disk formats: manifest.json + arrays.bin directories (little-endian f64,
// row-major, complex as interleaved re/im), CSV tables and atomic writes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biplate/core.hpp"

namespace biplate::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Writes through a temporary file in the same directory and renames it into
/// place. All calls are serialized on one process-wide mutex.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

std::string source_hash(const SourceField& f);

enum class DType { F64, C128 };

const char* dtype_name(DType t);
std::size_t dtype_size(DType t);

struct ArrayDescriptor {
    std::string name;
    std::vector<std::uint64_t> shape;
    DType dtype = DType::F64;
    std::uint64_t offset = 0;
    std::uint64_t bytes = 0;

    std::uint64_t element_count() const;
};

struct Geometry {
    double R = 0.0;
    double R_hat = 0.0;
    std::uint64_t n_vol = 0;
    double sigma = 0.0;
    std::string sphere_rule;
    std::uint64_t n_sphere = 0;
    double delta = 0.0;
    double K = 0.0;
    std::uint64_t nk = 0;
    std::string spacing;
};

struct ManifestProvenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    double noise_level = 0.0;
    std::string source_hash;
    std::string tool_version = kToolVersion;
};

struct DatasetManifest {
    int schema_version = kSchemaVersion;
    std::string kind;  // "cauchy_dataset" or "reconstruction"
    Geometry geometry;
    std::vector<double> frequencies;
    int smoothness = 0;
    std::vector<ArrayDescriptor> arrays;
    ManifestProvenance provenance;

    const ArrayDescriptor* find(std::string_view name) const;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(std::string_view text);

/// Named arrays in payload order. Complex arrays hold 2 doubles per element.
struct ArrayBlock {
    std::string name;
    std::vector<std::uint64_t> shape;
    DType dtype = DType::F64;
    std::vector<double> data;
};

/// Fills in the descriptors of `manifest` from the blocks and writes both
/// files. Refuses to replace an existing manifest unless force is set.
void write_array_dir(const std::filesystem::path& dir, DatasetManifest manifest, const std::vector<ArrayBlock>& blocks,
                     bool force);

struct ArrayDir {
    DatasetManifest manifest;
    std::string payload;

    /// Decoded copy of one array; throws ValidationError naming the array.
    std::vector<double> array(std::string_view name) const;
};

/// Reads and checks that the descriptors tile arrays.bin exactly.
ArrayDir read_array_dir(const std::filesystem::path& dir);

struct DatasetFiles {
    DatasetManifest manifest;
    CauchyDataset dataset;
    std::optional<SourceField> truth;
};

DatasetManifest dataset_manifest(const CauchyDataset& ds, double R_hat, std::size_t n_vol, int smoothness,
                                 double delta, double K, FrequencySpacing spacing);

void write_dataset(const std::filesystem::path& dir, const CauchyDataset& ds, const std::optional<SourceField>& truth,
                   DatasetManifest manifest, bool force);

DatasetFiles read_dataset(const std::filesystem::path& dir);

void write_field(const std::filesystem::path& dir, const SourceField& f, DatasetManifest manifest, bool force);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvColumn {
    std::string name;
    std::string unit;  // "1" for dimensionless
};

/// First line: "# <tool> <version> written <UTC timestamp>", the only line
/// that varies between identical runs. Then "# key: value" lines, the header
/// "name [unit],..." and the rows.
class CsvTable {
public:
    explicit CsvTable(std::vector<CsvColumn> columns);

    void add_meta(std::string key, std::string value);
    void add_row(std::vector<std::string> cells);
    std::size_t rows() const { return rows_.size(); }

    std::string render(std::string_view timestamp) const;
    /// Everything after the timestamp line.
    std::string body() const;

private:
    std::vector<CsvColumn> columns_;
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::vector<std::string>> rows_;
};

std::string fmt_double(double v);
std::string utc_timestamp();

/// Drops the first line of a rendered CSV.
std::string csv_body(std::string_view rendered);

}  // namespace biplate::io
