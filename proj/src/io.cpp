#include "biplate/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include <unistd.h>

#include "json.hpp"

namespace biplate::io {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::mutex& write_mutex() {
    static std::mutex m;
    return m;
}

void put_f64(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.append(b, 8);
}

double get_f64(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

DType parse_dtype(const std::string& s) {
    if (s == "f64") return DType::F64;
    if (s == "c128") return DType::C128;
    throw ValidationError("manifest: unknown dtype '" + s + "'");
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + "]";
}

const char* rule_name(SphereRule r) { return r == SphereRule::GaussProduct ? "gauss" : "fibonacci"; }

SphereRule rule_from_name(const std::string& s) {
    if (s == "gauss") return SphereRule::GaussProduct;
    if (s == "fibonacci") return SphereRule::Fibonacci;
    throw ValidationError("manifest: unknown sphere rule '" + s + "'");
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view bytes) {
    std::lock_guard lock(write_mutex());
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.flush();
        if (!os) {
            os.close();
            fs::remove(tmp);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string source_hash(const SourceField& f) {
    std::string bytes;
    bytes.reserve(f.values().size() * 8 + 16);
    put_f64(bytes, f.support_radius());
    put_f64(bytes, static_cast<double>(f.n_per_axis()));
    for (double v : f.values()) put_f64(bytes, v);
    return fnv1a_hex(bytes);
}

const char* dtype_name(DType t) { return t == DType::F64 ? "f64" : "c128"; }
std::size_t dtype_size(DType t) { return t == DType::F64 ? 8 : 16; }

std::uint64_t ArrayDescriptor::element_count() const {
    std::uint64_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

const ArrayDescriptor* DatasetManifest::find(std::string_view name) const {
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

std::string manifest_to_json(const DatasetManifest& m) {
    ojson j;
    j["schema_version"] = m.schema_version;
    j["kind"] = m.kind;
    const auto& g = m.geometry;
    j["geometry"] = {{"R", g.R},         {"R_hat", g.R_hat},         {"n_vol", g.n_vol}, {"sigma", g.sigma},
                     {"sphere_rule", g.sphere_rule}, {"n_sphere", g.n_sphere}, {"delta", g.delta}, {"K", g.K},
                     {"nk", g.nk},       {"spacing", g.spacing}};
    j["frequencies"] = m.frequencies;
    j["smoothness"] = m.smoothness;
    j["layout"] = "little-endian float64, row-major, complex as interleaved (re, im)";
    ojson arrays = ojson::array();
    for (const auto& a : m.arrays)
        arrays.push_back({{"name", a.name},
                          {"shape", a.shape},
                          {"dtype", dtype_name(a.dtype)},
                          {"offset", a.offset},
                          {"bytes", a.bytes}});
    j["arrays"] = arrays;
    const auto& p = m.provenance;
    j["provenance"] = {{"config_hash", p.config_hash},
                       {"seed", p.seed},
                       {"noise_level", p.noise_level},
                       {"source_hash", p.source_hash},
                       {"tool_version", p.tool_version}};
    return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("manifest.json: ") + e.what());
    }
    DatasetManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != kSchemaVersion)
            throw ValidationError("manifest.json: unsupported schema_version " + std::to_string(m.schema_version));
        m.kind = j.at("kind").get<std::string>();
        const auto& g = j.at("geometry");
        m.geometry.R = g.at("R").get<double>();
        m.geometry.R_hat = g.at("R_hat").get<double>();
        m.geometry.n_vol = g.at("n_vol").get<std::uint64_t>();
        m.geometry.sigma = g.at("sigma").get<double>();
        m.geometry.sphere_rule = g.at("sphere_rule").get<std::string>();
        m.geometry.n_sphere = g.at("n_sphere").get<std::uint64_t>();
        m.geometry.delta = g.at("delta").get<double>();
        m.geometry.K = g.at("K").get<double>();
        m.geometry.nk = g.at("nk").get<std::uint64_t>();
        m.geometry.spacing = g.at("spacing").get<std::string>();
        m.frequencies = j.at("frequencies").get<std::vector<double>>();
        m.smoothness = j.at("smoothness").get<int>();
        for (const auto& a : j.at("arrays")) {
            ArrayDescriptor d;
            d.name = a.at("name").get<std::string>();
            d.shape = a.at("shape").get<std::vector<std::uint64_t>>();
            d.dtype = parse_dtype(a.at("dtype").get<std::string>());
            d.offset = a.at("offset").get<std::uint64_t>();
            d.bytes = a.at("bytes").get<std::uint64_t>();
            m.arrays.push_back(std::move(d));
        }
        const auto& p = j.at("provenance");
        m.provenance.config_hash = p.at("config_hash").get<std::string>();
        m.provenance.seed = p.at("seed").get<std::uint64_t>();
        m.provenance.noise_level = p.at("noise_level").get<double>();
        m.provenance.source_hash = p.at("source_hash").get<std::string>();
        m.provenance.tool_version = p.at("tool_version").get<std::string>();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError(std::string("manifest.json: ") + e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Array directories
// ---------------------------------------------------------------------------

void write_array_dir(const fs::path& dir, DatasetManifest manifest, const std::vector<ArrayBlock>& blocks, bool force) {
    const auto manifest_path = dir / "manifest.json";
    if (!force && fs::exists(manifest_path))
        throw ValidationError(manifest_path.string() + " exists; pass --force to overwrite");
    std::string payload;
    manifest.arrays.clear();
    for (const auto& b : blocks) {
        ArrayDescriptor d;
        d.name = b.name;
        d.shape = b.shape;
        d.dtype = b.dtype;
        d.offset = payload.size();
        const std::uint64_t doubles = d.element_count() * (b.dtype == DType::C128 ? 2 : 1);
        if (doubles != b.data.size())
            throw std::logic_error("array '" + b.name + "': data size does not match shape " + shape_string(b.shape));
        d.bytes = doubles * 8;
        for (double v : b.data) put_f64(payload, v);
        manifest.arrays.push_back(std::move(d));
    }
    fs::create_directories(dir);
    atomic_write(dir / "arrays.bin", payload);
    atomic_write(manifest_path, manifest_to_json(manifest));
}

std::vector<double> ArrayDir::array(std::string_view name) const {
    const auto* d = manifest.find(name);
    if (!d) throw ValidationError("array '" + std::string(name) + "' is missing from the manifest");
    std::vector<double> out(d->bytes / 8);
    const char* p = payload.data() + d->offset;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f64(p + 8 * i);
    return out;
}

ArrayDir read_array_dir(const fs::path& dir) {
    ArrayDir out;
    out.manifest = manifest_from_json(read_file(dir / "manifest.json"));
    out.payload = read_file(dir / "arrays.bin");
    std::uint64_t expect = 0;
    for (const auto& d : out.manifest.arrays) {
        const std::string where = "array '" + d.name + "'";
        if (d.bytes != d.element_count() * dtype_size(d.dtype))
            throw ValidationError(where + ": byte count does not match shape " + shape_string(d.shape));
        if (d.offset != expect)
            throw ValidationError(where + ": offset " + std::to_string(d.offset) + " leaves a gap or overlap (expected " +
                                  std::to_string(expect) + ")");
        if (d.offset + d.bytes > out.payload.size())
            throw ValidationError(where + ": extends past the end of arrays.bin (" + std::to_string(d.offset + d.bytes) +
                                  " > " + std::to_string(out.payload.size()) + " bytes)");
        expect += d.bytes;
    }
    if (expect != out.payload.size())
        throw ValidationError("arrays.bin has " + std::to_string(out.payload.size() - expect) +
                              " trailing bytes not covered by any array");
    return out;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

namespace {

void expect_shape(const ArrayDescriptor* d, std::string_view name, const std::vector<std::uint64_t>& shape, DType t) {
    if (!d) throw ValidationError("array '" + std::string(name) + "' is missing from the manifest");
    if (d->shape != shape || d->dtype != t)
        throw ValidationError("array '" + d->name + "': expected " + dtype_name(t) + " " + shape_string(shape) +
                              ", found " + dtype_name(d->dtype) + " " + shape_string(d->shape));
}

}  // namespace

DatasetManifest dataset_manifest(const CauchyDataset& ds, double R_hat, std::size_t n_vol, int smoothness, double delta,
                                 double K, FrequencySpacing spacing) {
    DatasetManifest m;
    m.kind = "cauchy_dataset";
    m.geometry.R = ds.sphere.radius();
    m.geometry.R_hat = R_hat;
    m.geometry.n_vol = n_vol;
    m.geometry.sigma = ds.sigma;
    m.geometry.sphere_rule = rule_name(ds.sphere.rule());
    m.geometry.n_sphere = ds.sphere.size();
    m.geometry.delta = delta;
    m.geometry.K = K;
    m.geometry.nk = ds.frequencies.size();
    m.geometry.spacing = spacing == FrequencySpacing::Sqrt ? "sqrt" : "linear";
    m.frequencies = ds.frequencies.nodes();
    m.smoothness = smoothness;
    m.provenance.seed = ds.provenance.seed;
    m.provenance.noise_level = ds.provenance.noise_level;
    m.provenance.source_hash = ds.provenance.source_hash;
    return m;
}

void write_dataset(const fs::path& dir, const CauchyDataset& ds, const std::optional<SourceField>& truth,
                   DatasetManifest manifest, bool force) {
    ds.validate();
    const std::uint64_t N = ds.sphere.size(), nk = ds.traces.size();
    std::vector<ArrayBlock> blocks;
    ArrayBlock pts{"sphere_points", {N, 3}, DType::F64, {}};
    ArrayBlock wts{"sphere_weights", {N}, DType::F64, ds.sphere.weights()};
    for (const auto& p : ds.sphere.points()) pts.data.insert(pts.data.end(), p.begin(), p.end());
    ArrayBlock u{"u", {nk, N}, DType::C128, {}}, gu{"grad_u", {nk, N, 3}, DType::C128, {}};
    ArrayBlock lu{"lap_u", {nk, N}, DType::C128, {}}, glu{"grad_lap_u", {nk, N, 3}, DType::C128, {}};
    auto push = [](std::vector<double>& v, cplx c) {
        v.push_back(c.real());
        v.push_back(c.imag());
    };
    for (const auto& t : ds.traces)
        for (std::size_t i = 0; i < N; ++i) {
            push(u.data, t.u[i]);
            push(lu.data, t.lap_u[i]);
            for (int a = 0; a < 3; ++a) {
                push(gu.data, t.grad_u[i][a]);
                push(glu.data, t.grad_lap_u[i][a]);
            }
        }
    blocks.push_back(std::move(pts));
    blocks.push_back(std::move(wts));
    blocks.push_back(std::move(u));
    blocks.push_back(std::move(gu));
    blocks.push_back(std::move(lu));
    blocks.push_back(std::move(glu));
    if (truth) {
        const std::uint64_t n = truth->n_per_axis();
        blocks.push_back({"source", {n, n, n}, DType::F64, truth->values()});
    }
    write_array_dir(dir, std::move(manifest), blocks, force);
}

DatasetFiles read_dataset(const fs::path& dir) {
    auto ad = read_array_dir(dir);
    const auto& m = ad.manifest;
    if (m.kind != "cauchy_dataset") throw ValidationError("manifest.json: kind '" + m.kind + "' is not a dataset");
    const std::uint64_t N = m.geometry.n_sphere, nk = m.geometry.nk;
    if (m.frequencies.size() != nk) throw ValidationError("manifest.json: frequencies length differs from nk");
    expect_shape(m.find("sphere_points"), "sphere_points", {N, 3}, DType::F64);
    expect_shape(m.find("sphere_weights"), "sphere_weights", {N}, DType::F64);
    expect_shape(m.find("u"), "u", {nk, N}, DType::C128);
    expect_shape(m.find("grad_u"), "grad_u", {nk, N, 3}, DType::C128);
    expect_shape(m.find("lap_u"), "lap_u", {nk, N}, DType::C128);
    expect_shape(m.find("grad_lap_u"), "grad_lap_u", {nk, N, 3}, DType::C128);

    const auto pts = ad.array("sphere_points");
    std::vector<Vec3> points(N);
    for (std::size_t i = 0; i < N; ++i) points[i] = {pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]};
    auto sphere = [&] {
        try {
            return SphereGrid::from_points(m.geometry.R, std::move(points), ad.array("sphere_weights"),
                                           rule_from_name(m.geometry.sphere_rule));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("array 'sphere_points': ") + e.what());
        }
    }();

    const auto u = ad.array("u"), gu = ad.array("grad_u"), lu = ad.array("lap_u"), glu = ad.array("grad_lap_u");
    std::vector<CauchyTrace> traces;
    traces.reserve(nk);
    for (std::size_t j = 0; j < nk; ++j) {
        auto t = CauchyTrace::zeros(m.frequencies[j], N);
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t s = j * N + i;
            t.u[i] = {u[2 * s], u[2 * s + 1]};
            t.lap_u[i] = {lu[2 * s], lu[2 * s + 1]};
            for (int a = 0; a < 3; ++a) {
                const std::size_t v = 3 * s + a;
                t.grad_u[i][a] = {gu[2 * v], gu[2 * v + 1]};
                t.grad_lap_u[i][a] = {glu[2 * v], glu[2 * v + 1]};
            }
        }
        traces.push_back(std::move(t));
    }
    FrequencyGrid freqs = [&] {
        try {
            return FrequencyGrid::from_nodes(m.frequencies);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("manifest.json frequencies: ") + e.what());
        }
    }();
    Provenance prov{m.provenance.source_hash, m.provenance.seed, m.provenance.noise_level};
    CauchyDataset ds{std::move(sphere), std::move(freqs), std::move(traces), m.geometry.sigma, prov};
    ds.validate();

    std::optional<SourceField> truth;
    if (const auto* d = m.find("source")) {
        const std::uint64_t n = m.geometry.n_vol;
        expect_shape(d, "source", {n, n, n}, DType::F64);
        truth.emplace(m.geometry.R_hat, n, ad.array("source"), m.smoothness);
    }
    return {m, std::move(ds), std::move(truth)};
}

void write_field(const fs::path& dir, const SourceField& f, DatasetManifest manifest, bool force) {
    const std::uint64_t n = f.n_per_axis();
    manifest.kind = "reconstruction";
    manifest.geometry.R_hat = f.support_radius();
    manifest.geometry.n_vol = n;
    write_array_dir(dir, std::move(manifest), {{"f_rec", {n, n, n}, DType::F64, f.values()}}, force);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

CsvTable::CsvTable(std::vector<CsvColumn> columns) : columns_(std::move(columns)) {}

void CsvTable::add_meta(std::string key, std::string value) { meta_.emplace_back(std::move(key), std::move(value)); }

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("CsvTable: row width differs from header");
    rows_.push_back(std::move(cells));
}

std::string CsvTable::body() const {
    std::string s;
    for (const auto& [k, v] : meta_) s += "# " + k + ": " + v + "\n";
    for (std::size_t i = 0; i < columns_.size(); ++i)
        s += (i ? "," : "") + columns_[i].name + " [" + columns_[i].unit + "]";
    s += "\n";
    for (const auto& r : rows_) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
        s += "\n";
    }
    return s;
}

std::string CsvTable::render(std::string_view timestamp) const {
    return "# biplate " + std::string(kToolVersion) + " written " + std::string(timestamp) + "\n" + body();
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string csv_body(std::string_view rendered) {
    const auto nl = rendered.find('\n');
    return nl == std::string_view::npos ? std::string() : std::string(rendered.substr(nl + 1));
}

}  // namespace biplate::io
