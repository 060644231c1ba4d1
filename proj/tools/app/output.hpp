#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace kolmo::app {

/// A file produced by a run, held in memory until the run succeeds.
struct Artifact {
    std::string name;
    std::string content;
};

/// Writes `content` to dir/name through a temporary file and a rename.
void write_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& content);

std::uint64_t fnv1a64(const std::string& bytes);

/// Stream with round-trip precision for CSV numbers.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& header);
    template <class... Ts>
    void row(const Ts&... v) {
        bool first = true;
        ((os_ << (first ? "" : ",") << v, first = false), ...);
        os_ << '\n';
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

/// Manifest: resolved config, build information, and a digest of every output.
nlohmann::json manifest(const std::string& command, const nlohmann::json& config, const std::vector<Artifact>& files);

}  // namespace kolmo::app
