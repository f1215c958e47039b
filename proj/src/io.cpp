#include "penex/io.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace penex {

static_assert(std::endian::native == std::endian::little, "blob IO assumes a little-endian host");

namespace {

using json = nlohmann::ordered_json;

void write_doubles(const std::filesystem::path& path, const double* data, std::size_t count)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<double> read_doubles(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0) throw std::runtime_error(path.string() + ": size is not a multiple of 8");
    std::vector<double> out(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("read failed for " + path.string());
    return out;
}

json read_meta(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "meta.json");
    if (!in) throw std::runtime_error("cannot read " + (dir / "meta.json").string());
    return json::parse(in);
}

}  // namespace

void write_vector(const std::filesystem::path& path, const VectorXd& v)
{
    write_doubles(path, v.data(), static_cast<std::size_t>(v.size()));
}

VectorXd read_vector(const std::filesystem::path& path)
{
    const auto raw = read_doubles(path);
    return Eigen::Map<const VectorXd>(raw.data(), static_cast<Index>(raw.size()));
}

void write_matrix(const std::filesystem::path& path, const MatrixXd& m)
{
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_doubles(path, rm.data(), static_cast<std::size_t>(rm.size()));
}

MatrixXd read_matrix(const std::filesystem::path& path, Index rows, Index cols)
{
    const auto raw = read_doubles(path);
    if (static_cast<Index>(raw.size()) != rows * cols)
        throw std::runtime_error(path.string() + ": expected " + std::to_string(rows * cols) + " values");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(raw.data(), rows,
                                                                                                   cols);
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data, std::optional<Index> group_size)
{
    std::filesystem::create_directories(dir);
    json meta{{"format", "penex-dataset-1"},
              {"n", data.n()},
              {"p", data.p()},
              {"model", to_string(data.model_kind)},
              {"design", to_string(data.design_kind)},
              {"covariance", data.covariance},
              {"noise_sd", data.noise_sd},
              {"seed", data.seed}};
    if (group_size) meta["group_size"] = *group_size;
    std::ofstream out(dir / "meta.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << "\n";
    write_matrix(dir / "X.bin", data.X);
    write_vector(dir / "y.bin", data.y);
    write_vector(dir / "beta_star.bin", data.beta_star);
    if (data.model_kind == ModelKind::linear) write_vector(dir / "eps.bin", data.noise);
}

Dataset load_dataset(const std::filesystem::path& dir)
{
    const json meta = read_meta(dir);
    Dataset data;
    const auto n = meta.at("n").get<Index>();
    const auto p = meta.at("p").get<Index>();
    data.model_kind = parse_model_kind(meta.at("model").get<std::string>());
    data.design_kind = parse_design_kind(meta.at("design").get<std::string>());
    data.covariance = meta.at("covariance").get<std::string>();
    data.noise_sd = meta.at("noise_sd").get<double>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    data.X = read_matrix(dir / "X.bin", n, p);
    data.y = read_vector(dir / "y.bin");
    data.beta_star = read_vector(dir / "beta_star.bin");
    if (data.y.size() != n || data.beta_star.size() != p) throw std::runtime_error("dataset blobs disagree with meta.json");
    if (data.model_kind == ModelKind::linear) {
        data.noise = read_vector(dir / "eps.bin");
        if (data.noise.size() != n) throw std::runtime_error("eps.bin disagrees with meta.json");
    }
    return data;
}

std::optional<Index> load_group_size(const std::filesystem::path& dir)
{
    const json meta = read_meta(dir);
    if (!meta.contains("group_size")) return std::nullopt;
    return meta.at("group_size").get<Index>();
}

}  // namespace penex
