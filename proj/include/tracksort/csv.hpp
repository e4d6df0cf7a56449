#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tracksort::csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

/// Header-indexed CSV reader. Columns are looked up by name so files with
/// extra or reordered columns still parse.
class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw std::runtime_error("cannot open file: " + path);
        std::string header;
        if (!std::getline(in_, header))
            throw std::runtime_error(path + ": empty file, expected a header row");
        auto names = split_line(header);
        for (std::size_t i = 0; i < names.size(); ++i) columns_[names[i]] = i;
        line_no_ = 1;
    }

    std::size_t column(const std::string& name) const {
        auto it = columns_.find(name);
        if (it == columns_.end())
            throw std::runtime_error(path_ + ": missing column '" + name + "'");
        return it->second;
    }

    bool has_column(const std::string& name) const { return columns_.count(name) > 0; }

    /// Reads the next row; returns false at EOF. Blank lines are skipped.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty() || line == "\r") continue;
            fields = split_line(line);
            if (fields.size() != columns_.size())
                throw std::runtime_error(parse_error("wrong field count"));
            return true;
        }
        return false;
    }

    long long as_int(const std::vector<std::string>& fields, std::size_t col) const {
        const std::string& s = fields.at(col);
        long long v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw std::runtime_error(parse_error("bad integer '" + s + "'"));
        return v;
    }

    double as_double(const std::vector<std::string>& fields, std::size_t col) const {
        const std::string& s = fields.at(col);
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(parse_error("bad number '" + s + "'"));
        }
    }

    std::size_t line_number() const { return line_no_; }

private:
    std::string parse_error(const std::string& what) const {
        std::ostringstream os;
        os << path_ << ":" << line_no_ << ": " << what;
        return os.str();
    }

    std::string path_;
    std::ifstream in_;
    std::unordered_map<std::string, std::size_t> columns_;
    std::size_t line_no_ = 0;
};

} // namespace tracksort::csv
