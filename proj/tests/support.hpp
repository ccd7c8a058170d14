#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "chidt/c45.hpp"
#include "chidt/dataset.hpp"
#include "chidt/random.hpp"

namespace chidt::testing {

inline std::string source_path(const std::string& relative) { return std::string(CHIDT_SOURCE_DIR) + "/" + relative; }

// Quinlan's 14-day weather data.
struct WeatherRow {
    std::string outlook;
    double temperature;
    double humidity;
    std::string windy;
    std::string play;
};

inline const std::vector<WeatherRow>& weather_rows()
{
    static const std::vector<WeatherRow> rows{
        {"sunny", 85, 85, "false", "no"},     {"sunny", 80, 90, "true", "no"},
        {"overcast", 83, 86, "false", "yes"}, {"rainy", 70, 96, "false", "yes"},
        {"rainy", 68, 80, "false", "yes"},    {"rainy", 65, 70, "true", "no"},
        {"overcast", 64, 65, "true", "yes"},  {"sunny", 72, 95, "false", "no"},
        {"sunny", 69, 70, "false", "yes"},    {"rainy", 75, 80, "false", "yes"},
        {"sunny", 75, 70, "true", "yes"},     {"overcast", 72, 90, "true", "yes"},
        {"overcast", 81, 75, "false", "yes"}, {"rainy", 71, 91, "true", "no"},
    };
    return rows;
}

inline TrainingSet weather_set()
{
    TrainingSet set;
    set.attributes = {
        {"outlook", AttributeKind::nominal, {"sunny", "overcast", "rainy"}, 0},
        {"temperature", AttributeKind::numeric, {}, 1},
        {"humidity", AttributeKind::numeric, {}, 2},
        {"windy", AttributeKind::nominal, {"false", "true"}, 3},
    };
    set.classes = {"yes", "no"};
    for (const auto& r : weather_rows()) {
        set.rows.push_back({static_cast<double>(*set.attributes[0].value_index(r.outlook)), r.temperature, r.humidity,
                            static_cast<double>(*set.attributes[3].value_index(r.windy))});
        set.targets.push_back(r.play == "yes" ? 0 : 1);
    }
    return set;
}

inline std::vector<AttributeMeta> binary_attributes(std::size_t n)
{
    std::vector<AttributeMeta> attrs;
    for (std::size_t i = 0; i < n; ++i) {
        attrs.push_back({"b" + std::to_string(i + 1), AttributeKind::nominal, {"0", "1"}, i});
    }
    return attrs;
}

// Dataset over binary features; rows are (bits, labels).
inline Dataset binary_dataset(std::size_t width, const std::vector<std::pair<std::vector<int>, LabelSet>>& rows,
                              std::vector<Code> alphabet = {})
{
    std::vector<Record> records;
    LabelSet seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Record r;
        r.id = "r" + std::to_string(i + 1);
        for (const int b : rows[i].first) {
            r.features.push_back(b);
        }
        r.labels = rows[i].second;
        seen.insert(r.labels.begin(), r.labels.end());
        records.push_back(std::move(r));
    }
    if (alphabet.empty()) {
        alphabet.assign(seen.begin(), seen.end());
    }
    Dataset ds("toy", binary_attributes(width), "labels", std::move(alphabet), std::move(records));
    ds.validate();
    return ds;
}

inline std::vector<int> bits_of(unsigned value, std::size_t width)
{
    std::vector<int> bits(width);
    for (std::size_t i = 0; i < width; ++i) {
        bits[i] = static_cast<int>((value >> i) & 1U);
    }
    return bits;
}

// Direct-formula oracles, written independently of the library code.
namespace oracle {

inline double entropy(const std::vector<double>& counts)
{
    double n = 0;
    for (const double c : counts) {
        n += c;
    }
    double h = 0;
    for (const double c : counts) {
        if (c > 0) {
            h -= c / n * std::log2(c / n);
        }
    }
    return h;
}

struct Split {
    double gain = 0;
    double split_info = 0;
    double ratio() const { return gain / split_info; }
};

// Class labels grouped by branch key.
template <typename Key>
Split split_of(const std::vector<Key>& keys, const std::vector<int>& classes, int k)
{
    std::map<Key, std::vector<double>> groups;
    std::vector<double> all(k, 0);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto& g = groups[keys[i]];
        g.resize(k, 0);
        g[classes[i]] += 1;
        all[classes[i]] += 1;
    }
    const double n = static_cast<double>(keys.size());
    Split s;
    s.gain = entropy(all);
    std::vector<double> sizes;
    for (const auto& [key, g] : groups) {
        double m = 0;
        for (const double c : g) {
            m += c;
        }
        s.gain -= m / n * entropy(g);
        sizes.push_back(m);
    }
    s.split_info = entropy(sizes);
    return s;
}

} // namespace oracle

} // namespace chidt::testing
