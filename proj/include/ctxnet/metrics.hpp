#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ctxnet/error.hpp"
#include "ctxnet/kvconfig.hpp"

namespace ctxnet {

/// counts[truth * k + predicted]
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}

    void add(std::uint32_t truth, std::uint32_t predicted, std::uint64_t n = 1) {
        require(truth < k && predicted < k, "data", "label outside the confusion matrix");
        counts[truth * k + predicted] += n;
    }

    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * k + predicted]; }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }

    std::uint64_t trace() const {
        std::uint64_t t = 0;
        for (std::size_t c = 0; c < k; ++c) t += at(c, c);
        return t;
    }
};

/// Point- or sample-level scores. per_class_iou is NaN for classes absent
/// from both truth and prediction, per_class_accuracy NaN for classes
/// absent from truth; such classes are left out of the means.
struct MetricsReport {
    double overall_accuracy = 0;
    double avg_class_accuracy = 0;
    double mean_iou = 0;
    std::vector<double> per_class_iou;
    std::vector<double> per_class_accuracy;
    ConfusionMatrix confusion;

    static MetricsReport from_confusion(const ConfusionMatrix& cm) {
        MetricsReport r;
        r.confusion = cm;
        const auto total = cm.total();
        r.overall_accuracy = total ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.per_class_iou.assign(cm.k, nan);
        r.per_class_accuracy.assign(cm.k, nan);
        double iou_sum = 0, acc_sum = 0;
        std::size_t iou_n = 0, acc_n = 0;
        for (std::size_t c = 0; c < cm.k; ++c) {
            std::uint64_t truth = 0, pred = 0;
            for (std::size_t j = 0; j < cm.k; ++j) {
                truth += cm.at(c, j);
                pred += cm.at(j, c);
            }
            const auto tp = cm.at(c, c);
            const auto uni = truth + pred - tp;  // TP + FP + FN
            if (uni > 0) {
                r.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
                iou_sum += r.per_class_iou[c];
                ++iou_n;
            }
            if (truth > 0) {
                r.per_class_accuracy[c] = static_cast<double>(tp) / static_cast<double>(truth);
                acc_sum += r.per_class_accuracy[c];
                ++acc_n;
            }
        }
        r.mean_iou = iou_n ? iou_sum / static_cast<double>(iou_n) : 0.0;
        r.avg_class_accuracy = acc_n ? acc_sum / static_cast<double>(acc_n) : 0.0;
        return r;
    }

    /// Machine-readable "key = value" lines.
    std::string to_kv_text() const {
        KeyValues kv;
        kv.set("overall_accuracy", format_real(overall_accuracy));
        kv.set("avg_class_accuracy", format_real(avg_class_accuracy));
        kv.set("mean_iou", format_real(mean_iou));
        kv.set("classes", std::to_string(confusion.k));
        kv.set("total", std::to_string(confusion.total()));
        for (std::size_t c = 0; c < confusion.k; ++c) {
            kv.set("iou." + std::to_string(c), std::isnan(per_class_iou[c]) ? "nan" : format_real(per_class_iou[c]));
            std::vector<std::uint64_t> row(confusion.counts.begin() + static_cast<std::ptrdiff_t>(c * confusion.k),
                                           confusion.counts.begin() + static_cast<std::ptrdiff_t>((c + 1) * confusion.k));
            kv.set("confusion." + std::to_string(c), join_list(row));
        }
        return kv.to_text();
    }

    std::string to_table() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4);
        os << "overall accuracy    " << overall_accuracy << '\n';
        os << "avg class accuracy  " << avg_class_accuracy << '\n';
        os << "mean IoU            " << mean_iou << '\n';
        os << "class  IoU     recall  support\n";
        for (std::size_t c = 0; c < confusion.k; ++c) {
            std::uint64_t support = 0;
            for (std::size_t j = 0; j < confusion.k; ++j) support += confusion.at(c, j);
            os << std::setw(5) << c << "  ";
            if (std::isnan(per_class_iou[c])) os << "   -  ";
            else os << per_class_iou[c];
            os << "  ";
            if (std::isnan(per_class_accuracy[c])) os << "   -  ";
            else os << per_class_accuracy[c];
            os << "  " << support << '\n';
        }
        return os.str();
    }
};

}  // namespace ctxnet
