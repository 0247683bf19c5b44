#include "nsv/persist.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nsv/config.hpp"

namespace nsv::persist {

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), enough for content addressing of artifacts.
// ---------------------------------------------------------------------------

namespace {

struct Sha256 {
    std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                   0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    std::array<unsigned char, 64> block{};
    std::size_t block_len = 0;
    std::uint64_t total_bits = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void compress() {
        static constexpr std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(block[i * 4]) << 24) | (std::uint32_t(block[i * 4 + 1]) << 16) |
                   (std::uint32_t(block[i * 4 + 2]) << 8) | std::uint32_t(block[i * 4 + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                      hh = h[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
            const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = s0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }

    void update(const unsigned char* data, std::size_t len) {
        total_bits += std::uint64_t(len) * 8;
        while (len > 0) {
            const std::size_t take = std::min(len, block.size() - block_len);
            std::memcpy(block.data() + block_len, data, take);
            block_len += take;
            data += take;
            len -= take;
            if (block_len == block.size()) {
                compress();
                block_len = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total_bits;
        const unsigned char pad = 0x80;
        update(&pad, 1);
        const unsigned char zero = 0;
        while (block_len != 56) update(&zero, 1);
        unsigned char lenb[8];
        for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(lenb, 8);
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint32_t word : h)
            for (int shift = 28; shift >= 0; shift -= 4) out.push_back(hex[(word >> shift) & 0xF]);
        return out;
    }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 s;
    s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    return s.finish();
}

std::string hash_file(const fs::path& path) { return sha256_hex(read_text(path)); }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw ComputeError("cannot write " + temp.string());
        out << text;
        if (!out) throw ComputeError("write failed for " + temp.string());
    }
    fs::rename(temp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ComputeError("missing artifact: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json_file(const fs::path& path, const json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ComputeError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const std::vector<Vec>& rows) {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out += ',';
        out += columns[c];
    }
    out += '\n';
    for (const Vec& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------
// Series files.
// ---------------------------------------------------------------------------

namespace {

std::string rows_to_text(const json& header, const std::vector<Vec>& rows, double dt, double t0) {
    std::string out = header.dump();
    out += '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += format_double(t0 + static_cast<double>(i) * dt);
        for (double v : rows[i]) {
            out += '\t';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

struct ParsedSeries {
    json header;
    std::vector<Vec> rows;
    Vec times;
};

ParsedSeries parse_series(const fs::path& path) {
    const std::string text = read_text(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ComputeError("empty series file " + path.string());
    ParsedSeries out;
    try {
        out.header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ComputeError("malformed series header in " + path.string() + ": " + e.what());
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vec row;
        std::size_t start = 0;
        bool first = true;
        while (start <= line.size()) {
            std::size_t tab = line.find('\t', start);
            std::string_view cell(line.data() + start,
                                  (tab == std::string::npos ? line.size() : tab) - start);
            const double v = parse_double(cell);
            if (first) {
                out.times.push_back(v);
                first = false;
            } else {
                row.push_back(v);
            }
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        out.rows.push_back(std::move(row));
    }
    if (out.rows.empty()) throw ComputeError("series file has no samples: " + path.string());
    return out;
}

}  // namespace

void write_state_trajectory(const fs::path& path, const systems::Trajectory& traj,
                            const json& params) {
    json header{{"format_version", 1},
                {"kind", "trajectory"},
                {"system", traj.system},
                {"params", params},
                {"dt", traj.dt},
                {"n_steps", traj.states.size()},
                {"seed", traj.seed}};
    std::vector<Vec> rows;
    rows.reserve(traj.states.size());
    for (const auto& s : traj.states) rows.push_back(s.values);
    const double t0 = traj.states.empty() ? 0.0 : traj.states.front().t;
    write_text(path, rows_to_text(header, rows, traj.dt, t0));
}

systems::Trajectory read_state_trajectory(const fs::path& path, json* header) {
    ParsedSeries parsed = parse_series(path);
    systems::Trajectory traj;
    traj.system = parsed.header.value("system", "");
    traj.dt = parsed.header.at("dt").get<double>();
    traj.seed = parsed.header.value("seed", std::uint64_t{0});
    for (std::size_t i = 0; i < parsed.rows.size(); ++i)
        traj.states.push_back({std::move(parsed.rows[i]), parsed.times[i]});
    if (header) *header = parsed.header;
    return traj;
}

void write_latent_series(const fs::path& path, const lift::LatentSeries& series) {
    json header{{"format_version", 1},
                {"kind", "latent_series"},
                {"system", series.system},
                {"dt", series.dt},
                {"n_steps", series.observations.size()},
                {"dim", series.observations.empty() ? 0 : series.observations[0].size()},
                {"lift_seed", series.lift_seed},
                {"trajectory_seed", series.trajectory_seed},
                {"seq_index", series.seq_index}};
    write_text(path, rows_to_text(header, series.observations, series.dt, 0.0));
}

lift::LatentSeries read_latent_series(const fs::path& path) {
    ParsedSeries parsed = parse_series(path);
    lift::LatentSeries series;
    series.system = parsed.header.value("system", "");
    series.dt = parsed.header.at("dt").get<double>();
    series.lift_seed = parsed.header.value("lift_seed", std::uint64_t{0});
    series.trajectory_seed = parsed.header.value("trajectory_seed", std::uint64_t{0});
    series.seq_index = parsed.header.value("seq_index", std::size_t{0});
    series.observations = std::move(parsed.rows);
    return series;
}

void write_nsv_trajectory(const fs::path& path, const embed::NsvTrajectory& traj) {
    json header{{"format_version", 1},
                {"kind", "nsv_trajectory"},
                {"system", traj.system},
                {"dt", traj.dt},
                {"n_steps", traj.states.size()},
                {"dim", traj.states.empty() ? 0 : traj.states[0].size()},
                {"trajectory_seed", traj.trajectory_seed},
                {"seq_index", traj.seq_index}};
    write_text(path, rows_to_text(header, traj.states, traj.dt, 0.0));
}

embed::NsvTrajectory read_nsv_trajectory(const fs::path& path) {
    ParsedSeries parsed = parse_series(path);
    embed::NsvTrajectory traj;
    traj.system = parsed.header.value("system", "");
    traj.dt = parsed.header.at("dt").get<double>();
    traj.trajectory_seed = parsed.header.value("trajectory_seed", std::uint64_t{0});
    traj.seq_index = parsed.header.value("seq_index", std::size_t{0});
    traj.states = std::move(parsed.rows);
    return traj;
}

// ---------------------------------------------------------------------------
// Datasets.
// ---------------------------------------------------------------------------

void write_dataset(const lift::Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    json files = json::object();
    auto dump_split = [&](const std::string& name, const std::vector<lift::LatentSeries>& split) {
        json list = json::array();
        for (std::size_t i = 0; i < split.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s_%03zu.tsv", name.c_str(), i);
            const fs::path file = dir / buf;
            write_latent_series(file, split[i]);
            list.push_back({{"file", buf}, {"sha256", hash_file(file)}});
        }
        files[name] = list;
    };
    dump_split("train", dataset.train);
    dump_split("val", dataset.val);
    dump_split("test", dataset.test);

    json manifest{{"format_version", 1},
                  {"kind", "dataset"},
                  {"config", config::dataset_config_to_json(dataset.cfg)},
                  {"lift_seed", dataset.lift.seed},
                  {"counts",
                   {{"train", dataset.train.size()},
                    {"val", dataset.val.size()},
                    {"test", dataset.test.size()}}},
                  {"files", files}};
    write_json_file(dir / "manifest.json", manifest);
}

json read_dataset_manifest(const fs::path& dir) { return read_json_file(dir / "manifest.json"); }

lift::Dataset read_dataset(const fs::path& dir) {
    const json manifest = read_dataset_manifest(dir);
    lift::Dataset dataset;
    dataset.cfg = config::dataset_config_from_json(manifest.at("config"));
    dataset.lift = lift::make_lift(lift::lift_input_dim(dataset.cfg.params, dataset.cfg.angle_wrap),
                                   dataset.cfg.observation_dim,
                                   manifest.at("lift_seed").get<std::uint64_t>());

    auto load_split = [&](const std::string& name, std::vector<lift::LatentSeries>& split) {
        for (const json& entry : manifest.at("files").at(name)) {
            const fs::path file = dir / entry.at("file").get<std::string>();
            const std::string actual = hash_file(file);
            const std::string expected = entry.at("sha256").get<std::string>();
            if (actual != expected)
                throw ProvenanceError("dataset file " + file.string() + " hash mismatch: expected " +
                                      expected + ", got " + actual);
            split.push_back(read_latent_series(file));
        }
    };
    load_split("train", dataset.train);
    load_split("val", dataset.val);
    load_split("test", dataset.test);
    return dataset;
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

json mlp_to_json(const nn::MlpParams& params) {
    json layers = json::array();
    for (std::size_t l = 0; l < params.specs.size(); ++l) {
        json weights = json::array();
        for (double v : params.weights[l].a) weights.push_back(v);
        json biases = json::array();
        for (double v : params.biases[l]) biases.push_back(v);
        layers.push_back({{"in", params.specs[l].in},
                          {"out", params.specs[l].out},
                          {"activation", nn::activation_name(params.specs[l].act)},
                          {"weights", weights},
                          {"biases", biases}});
    }
    return json{{"fingerprint", params.fingerprint}, {"layers", layers}};
}

nn::MlpParams mlp_from_json(const json& doc) {
    nn::MlpParams params;
    for (const json& layer : doc.at("layers")) {
        nn::LayerSpec spec{layer.at("in").get<std::size_t>(), layer.at("out").get<std::size_t>(),
                           nn::activation_from_name(layer.at("activation").get<std::string>())};
        Mat w(spec.out, spec.in);
        const json& weights = layer.at("weights");
        if (weights.size() != w.a.size())
            throw ComputeError("checkpoint weight count mismatch for layer " +
                               std::to_string(params.specs.size()));
        for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] = weights[i].get<double>();
        Vec b(spec.out);
        const json& biases = layer.at("biases");
        if (biases.size() != b.size()) throw ComputeError("checkpoint bias count mismatch");
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = biases[i].get<double>();
        params.specs.push_back(spec);
        params.weights.push_back(std::move(w));
        params.biases.push_back(std::move(b));
    }
    params.fingerprint = nn::fingerprint_of(params.specs);
    const std::string recorded = doc.at("fingerprint").get<std::string>();
    if (recorded != params.fingerprint)
        throw ProvenanceError("checkpoint fingerprint mismatch: recorded " + recorded +
                              ", reconstructed " + params.fingerprint);
    return params;
}

void write_embedding(const fs::path& path, const embed::EmbeddingModel& model,
                     const json& metadata) {
    json doc{{"format_version", 1},
             {"kind", "embedding"},
             {"d", model.d},
             {"obs_dim", model.obs_dim},
             {"encoder", mlp_to_json(model.encoder)},
             {"decoder", mlp_to_json(model.decoder)},
             {"standardization",
              {{"mean", model.standardization.mean}, {"stdev", model.standardization.stdev}}},
             {"metadata", metadata}};
    write_json_file(path, doc);
}

embed::EmbeddingModel read_embedding(const fs::path& path, json* metadata) {
    const json doc = read_json_file(path);
    if (doc.value("kind", "") != "embedding")
        throw ComputeError(path.string() + " is not an embedding checkpoint");
    embed::EmbeddingModel model;
    model.d = doc.at("d").get<std::size_t>();
    model.obs_dim = doc.at("obs_dim").get<std::size_t>();
    model.encoder = mlp_from_json(doc.at("encoder"));
    model.decoder = mlp_from_json(doc.at("decoder"));
    model.standardization.mean = doc.at("standardization").at("mean").get<Vec>();
    model.standardization.stdev = doc.at("standardization").at("stdev").get<Vec>();
    if (metadata) *metadata = doc.value("metadata", json::object());
    return model;
}

void write_field_model(const fs::path& path, const field::FieldModel& model,
                       const json& metadata) {
    json doc{{"format_version", 1},
             {"kind", "field"},
             {"d", model.d},
             {"net", mlp_to_json(model.net)},
             {"metadata", metadata}};
    write_json_file(path, doc);
}

field::FieldModel read_field_model(const fs::path& path, json* metadata) {
    const json doc = read_json_file(path);
    if (doc.value("kind", "") != "field")
        throw ComputeError(path.string() + " is not a field checkpoint");
    field::FieldModel model;
    model.d = doc.at("d").get<std::size_t>();
    model.net = mlp_from_json(doc.at("net"));
    if (metadata) *metadata = doc.value("metadata", json::object());
    return model;
}

// ---------------------------------------------------------------------------
// Provenance.
// ---------------------------------------------------------------------------

json provenance_of(const std::vector<fs::path>& inputs) {
    json rec = json::object();
    for (const fs::path& p : inputs) rec[p.string()] = hash_file(p);
    return json{{"inputs", rec}};
}

void check_provenance(const json& provenance) {
    if (!provenance.contains("inputs")) return;
    std::string diff;
    for (const auto& [path, expected] : provenance.at("inputs").items()) {
        std::string actual;
        try {
            actual = hash_file(path);
        } catch (const ComputeError&) {
            diff += "\n  " + path + ": missing (expected " + expected.get<std::string>() + ")";
            continue;
        }
        if (actual != expected.get<std::string>())
            diff += "\n  " + path + ": expected " + expected.get<std::string>() + ", got " + actual;
    }
    if (!diff.empty()) throw ProvenanceError("input provenance mismatch:" + diff);
}

}  // namespace nsv::persist
