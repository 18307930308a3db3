#include "meshscape/config/scaffold.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace meshscape::config {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPlaceholderMap = R"(<svg xmlns="http://www.w3.org/2000/svg" width="1200" height="600" viewBox="0 0 1200 600">
  <rect width="1200" height="600" fill="#dfe9f3"/>
  <g stroke="#b8c9da" stroke-width="1">
    <path d="M0 150H1200M0 300H1200M0 450H1200M300 0V600M600 0V600M900 0V600"/>
  </g>
  <text x="600" y="310" font-family="sans-serif" font-size="28" fill="#7890a8" text-anchor="middle">Replace assets/map.svg with your testbed map</text>
</svg>
)";

constexpr std::string_view kPlaceholderLogo = R"(<svg xmlns="http://www.w3.org/2000/svg" width="160" height="48" viewBox="0 0 160 48">
  <rect width="160" height="48" rx="6" fill="#2d4a66"/>
  <text x="80" y="31" font-family="sans-serif" font-size="18" fill="#ffffff" text-anchor="middle">testbed</text>
</svg>
)";

constexpr std::string_view kReadme = R"(Testbed portal
==============

testbed.conf   portal definition: name, logo, map and resource pins
assets/        logo and map images referenced by testbed.conf

Serve it with:

    meshscape serve <this directory>

Resources can be added from the web UI in Edit mode (requires an admin token)
or by editing testbed.conf by hand; the running portal picks up edits.
)";

std::string read_asset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableAsset("cannot read asset " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw UnreadableAsset("cannot read asset " + path.string());
    return ss.str();
}

void write_new_file(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
}

struct Asset {
    std::string relative;
    std::string bytes;
};

Asset prepare_asset(const std::optional<fs::path>& source, std::string_view stem, std::string_view placeholder) {
    if (!source) return {std::string(kAssetsDir) + "/" + std::string(stem) + ".svg", std::string(placeholder)};
    std::string bytes = read_asset(*source);
    std::string type = sniff_image_type(bytes);
    if (type.empty()) throw UnreadableAsset(source->string() + " is not a png, jpeg, gif or svg image");
    return {std::string(kAssetsDir) + "/" + std::string(stem) + "." + type, std::move(bytes)};
}

}  // namespace

std::string sniff_image_type(std::string_view bytes) {
    if (bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8)) return "png";
    if (bytes.substr(0, 3) == "\xff\xd8\xff") return "jpg";
    if (bytes.substr(0, 6) == "GIF87a" || bytes.substr(0, 6) == "GIF89a") return "gif";
    const auto head = bytes.substr(0, 512);
    if (head.find("<svg") != std::string_view::npos) return "svg";
    return {};
}

std::vector<fs::path> scaffold(const fs::path& dir, const ScaffoldOptions& options) {
    std::error_code ec;
    const bool existed = fs::exists(dir, ec);
    if (existed) {
        if (!fs::is_directory(dir, ec)) throw DirNotEmpty(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir, ec)) throw DirNotEmpty(dir.string() + " is not empty");
    }

    // Read every input before touching the disk.
    const Asset map = prepare_asset(options.map_image, "map", kPlaceholderMap);
    const Asset logo = prepare_asset(options.logo_image, "logo", kPlaceholderLogo);

    TestbedConfig cfg;
    cfg.name = options.name;
    cfg.map_path = map.relative;
    cfg.logo_path = logo.relative;
    validate(cfg);

    std::vector<fs::path> created;
    auto rollback = [&] {
        if (existed) {
            for (const auto& entry : fs::directory_iterator(dir, ec)) fs::remove_all(entry.path(), ec);
        } else {
            fs::remove_all(dir, ec);
        }
    };
    try {
        fs::create_directories(dir / kAssetsDir);
        write_new_file(dir / map.relative, map.bytes);
        created.emplace_back(map.relative);
        write_new_file(dir / logo.relative, logo.bytes);
        created.emplace_back(logo.relative);
        write_new_file(dir / "README", kReadme);
        created.emplace_back("README");
        save_config(dir / kConfigFileName, cfg);
        created.emplace_back(kConfigFileName);
    } catch (const fs::filesystem_error& e) {
        rollback();
        throw IoError(e.what());
    } catch (...) {
        rollback();
        throw;
    }
    return created;
}

}  // namespace meshscape::config
