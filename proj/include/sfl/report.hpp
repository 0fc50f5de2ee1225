#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sfl/error.hpp"
#include "sfl/io.hpp"

namespace sfl {

using json = nlohmann::json;

enum class Status { pass, fail, inapplicable };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::inapplicable: return "inapplicable";
    }
    return "?";
}

struct Verdict {
    std::string id;
    Status status = Status::inapplicable;
    double margin = 0.0;  // positive when the inequality holds with room
    std::string detail;
};

// SHA-1 of "blob <size>\0<bytes>", the object id git assigns to a file.
inline std::string git_blob_hash(const std::string& bytes) {
    const std::string framed = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(framed.data(), framed.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
        throw Error("SHA-1 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw Error("csv row width mismatch");
        rows_.push_back(values);
    }

    [[nodiscard]] std::string str() const {
        std::string out;
        for (std::size_t c = 0; c < columns_.size(); ++c) out += (c ? "," : "") + columns_[c];
        out += '\n';
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + fmt_double(r[c]);
            out += '\n';
        }
        return out;
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

// JSON report plus CSV side files. The hashed content excludes the
// timestamp, so identical inputs give identical hashes.
class Report {
public:
    json doc = json::object();
    std::vector<Verdict> verdicts;
    std::map<std::string, std::string> files;

    void level(const std::string& name, double value, const std::string& operation, const std::string& witness = "") {
        json& e = doc["levels"][name];
        e["value"] = value;
        e["operation"] = operation;
        if (!witness.empty()) e["witness"] = witness;
    }

    void interval(const std::string& name, double lower, double upper, const std::string& operation,
                  const std::string& witness = "") {
        json& e = doc["levels"][name];
        e["lower"] = lower;
        e["upper"] = upper;
        e["operation"] = operation;
        if (!witness.empty()) e["witness"] = witness;
    }

    Verdict& verdict(const std::string& id, Status status, double margin, const std::string& detail) {
        for (auto& v : verdicts) {
            if (v.id == id) throw Error("duplicate verdict " + id);
        }
        verdicts.push_back({id, status, margin, detail});
        return verdicts.back();
    }

    Verdict& check(const std::string& id, bool ok, double margin, const std::string& detail) {
        return verdict(id, ok ? Status::pass : Status::fail, margin, detail);
    }

    [[nodiscard]] const Verdict* find(const std::string& id) const {
        for (const auto& v : verdicts) {
            if (v.id == id) return &v;
        }
        return nullptr;
    }

    [[nodiscard]] bool all_pass() const {
        for (const auto& v : verdicts) {
            if (v.status == Status::fail) return false;
        }
        return true;
    }

    void csv(const std::string& name, const CsvTable& table) { files[name] = table.str(); }

    [[nodiscard]] json content() const {
        json out = doc;
        json& vs = out["verdicts"];
        vs = json::object();
        for (const auto& v : verdicts) {
            vs[v.id] = {{"status", to_string(v.status)}, {"margin", v.margin}, {"detail", v.detail}};
        }
        json& fl = out["files"];
        fl = json::object();
        for (const auto& [name, bytes] : files) fl[name] = git_blob_hash(bytes);
        return out;
    }

    [[nodiscard]] std::string hash() const { return git_blob_hash(content().dump(2)); }

    // report.json, report.hash and the CSV files, each written atomically.
    std::string write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        for (const auto& [name, bytes] : files) write_file_atomic(dir / name, bytes);
        json out = content();
        const std::string h = git_blob_hash(out.dump(2));
        out["report_hash"] = h;
        out["timestamp"] = timestamp();
        write_file_atomic(dir / "report.json", out.dump(2) + "\n");
        write_file_atomic(dir / "report.hash", h + "\n");
        return h;
    }

    static std::string timestamp() {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }
};

}  // namespace sfl
