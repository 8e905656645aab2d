#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ctxnet/error.hpp"
#include "ctxnet/network.hpp"
#include "ctxnet/pointcloud.hpp"

namespace ctxnet {

// A dataset directory holds binary-v1 sample files and "index.txt":
//
//   # task classify
//   # classes 4
//   samples/000000.bin 2
//   samples/000001.bin 0
//
// Segmentation entries carry "seg" instead of a class id; their labels are
// stored per point inside the sample file.

struct Dataset {
    std::optional<Task> task;
    std::size_t class_count = 0;
    std::vector<Sample> samples;
};

inline std::string sample_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "samples/%06zu.bin", i);
    return buf;
}

inline void write_dataset(const std::string& dir, const std::vector<Sample>& samples, Task task,
                          std::size_t class_count) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "samples");
    std::ofstream index(fs::path(dir) / "index.txt");
    require(static_cast<bool>(index), "io", "cannot write index in " + dir);
    index << "# task " << to_string(task) << "\n# classes " << class_count << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto rel = sample_file_name(i);
        save_points(s.cloud, (fs::path(dir) / rel).string(), PointFormat::BinaryV1);
        index << rel << ' ';
        if (task == Task::Classify) index << s.label << '\n';
        else index << "seg\n";
    }
    require(static_cast<bool>(index), "io", "write failed for index in " + dir);
}

inline Dataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto index_path = fs::path(dir) / "index.txt";
    std::ifstream in(index_path);
    require(static_cast<bool>(in), "io", "no index.txt in " + dir);
    Dataset ds;
    std::size_t max_label_plus_one = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks[0].front() == '#') {
            if (toks.size() == 3 && toks[1] == "task") ds.task = parse_task(std::string(toks[2]));
            if (toks.size() == 3 && toks[1] == "classes")
                ds.class_count = static_cast<std::size_t>(detail::parse_double(toks[2], line_no));
            continue;
        }
        require(toks.size() == 2, "parse",
                index_path.string() + " line " + std::to_string(line_no) + ": expected '<path> <label|seg>'");
        Sample s;
        s.cloud = load_points((fs::path(dir) / std::string(toks[0])).string());
        if (toks[1] == "seg") {
            require(s.cloud.has_labels(), "data", std::string(toks[0]) + " is marked seg but has no point labels");
            max_label_plus_one = std::max<std::size_t>(max_label_plus_one, s.cloud.class_count);
        } else {
            const double v = detail::parse_double(toks[1], line_no);
            require(v >= 0 && v == static_cast<double>(static_cast<int>(v)), "parse",
                    index_path.string() + " line " + std::to_string(line_no) + ": bad class id");
            s.label = static_cast<int>(v);
            max_label_plus_one = std::max<std::size_t>(max_label_plus_one, static_cast<std::size_t>(s.label) + 1);
        }
        ds.samples.push_back(std::move(s));
    }
    require(!ds.samples.empty(), "data", "dataset " + dir + " has no samples");
    if (!ds.task) ds.task = ds.samples.front().label < 0 ? Task::Segment : Task::Classify;
    ds.class_count = std::max(ds.class_count, max_label_plus_one);
    return ds;
}

}  // namespace ctxnet
