#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace brw::csv {

// Shortest round-trip decimal text for a double; deterministic across
// platforms, so byte-identical output contracts hold.
std::string format_double(double v);

std::string escape(const std::string& field);

// RFC-4180 writer, UTF-8, header row mandatory.
class Writer {
public:
    explicit Writer(const std::string& path);
    void row(std::span<const std::string> fields);
    void row(std::initializer_list<std::string> fields);
    bool good() const { return out_.good(); }

private:
    std::ofstream out_;
};

// Minimal RFC-4180 reader (quoted fields, embedded commas/newlines).
std::vector<std::vector<std::string>> read_file(const std::string& path);

}  // namespace brw::csv
