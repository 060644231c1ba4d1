#include "output.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <cstdio>
#include <fstream>

#include "kolmo/error.hpp"

namespace kolmo::app {

void write_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const auto final_path = dir / name;
    const auto tmp = dir / (name + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) throw ConfigError("cannot rename into '" + final_path.string() + "': " + ec.message());
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

CsvWriter::CsvWriter(const std::string& header) {
    os_.precision(17);
    os_ << header << '\n';
}

nlohmann::json manifest(const std::string& command, const nlohmann::json& config, const std::vector<Artifact>& files) {
    nlohmann::json m;
    m["tool"] = "kolmo";
    m["version"] = KOLMO_VERSION;
    m["command"] = command;
    m["config"] = config;
    m["build"] = {
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000)},
        {"compiler", __VERSION__},
#ifdef KOLMO_HAVE_OPENMP
        {"openmp", true},
#else
        {"openmp", false},
#endif
    };
    auto& out = m["outputs"] = nlohmann::json::array();
    for (const auto& f : files) {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(f.content)));
        out.push_back({{"file", f.name}, {"bytes", f.content.size()}, {"fnv1a64", hex}});
    }
    return m;
}

}  // namespace kolmo::app
