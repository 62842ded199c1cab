// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/metrics/report.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "echoone/core/errors.hpp"

namespace echoone {

namespace {

struct Accum {
  double dice = 0, iou = 0, hd = 0;
  long n = 0, hd_n = 0;

  void add(const MetricRecord& r) {
    dice += r.dice;
    iou += r.iou;
    ++n;
    if (r.hd95) {
      hd += *r.hd95;
      ++hd_n;
    }
  }

  Aggregate finish(const std::string& grouping) const {
    Aggregate a;
    a.grouping = grouping;
    a.n = n;
    a.hd95_excluded = n - hd_n;
    if (n > 0) {
      a.mdice = dice / static_cast<double>(n);
      a.miou = iou / static_cast<double>(n);
    }
    if (hd_n > 0) a.mhd95 = hd / static_cast<double>(hd_n);
    return a;
  }
};

}  // namespace

std::vector<Aggregate> aggregate_records(const std::vector<MetricRecord>& records) {
  std::vector<Aggregate> out;
  if (records.empty()) return out;

  std::map<int, Accum> by_plane;
  std::map<std::pair<int, std::string>, Accum> by_plane_dataset;
  std::map<std::string, Accum> by_dataset;
  std::map<std::pair<int, int>, Accum> by_structure_plane;
  for (const auto& r : records) {
    const int p = static_cast<int>(r.plane);
    by_plane[p].add(r);
    by_plane_dataset[{p, r.dataset_id}].add(r);
    by_dataset[r.dataset_id].add(r);
    by_structure_plane[{r.structure, p}].add(r);
  }

  for (const auto& [p, acc] : by_plane)
    out.push_back(acc.finish("plane:" + plane_to_string(static_cast<Plane>(p))));

  // Dataset-equal plane means: average the per-dataset means; datasets with
  // no defined HD95 drop out of the HD95 outer mean only.
  for (const auto& [p, _] : by_plane) {
    Aggregate a;
    a.grouping = "plane_dataset_equal:" + plane_to_string(static_cast<Plane>(p));
    double dice = 0, iou = 0, hd = 0;
    long nds = 0, nds_hd = 0;
    for (const auto& [key, acc] : by_plane_dataset) {
      if (key.first != p) continue;
      const Aggregate inner = acc.finish("");
      dice += inner.mdice;
      iou += inner.miou;
      ++nds;
      if (inner.mhd95) {
        hd += *inner.mhd95;
        ++nds_hd;
      }
      a.n += inner.n;
      a.hd95_excluded += inner.hd95_excluded;
    }
    a.mdice = dice / static_cast<double>(nds);
    a.miou = iou / static_cast<double>(nds);
    if (nds_hd > 0) a.mhd95 = hd / static_cast<double>(nds_hd);
    out.push_back(std::move(a));
  }

  for (const auto& [d, acc] : by_dataset) out.push_back(acc.finish("dataset:" + d));
  for (const auto& [key, acc] : by_structure_plane)
    out.push_back(acc.finish("structure_plane:" + std::to_string(key.first) + "/" +
                             plane_to_string(static_cast<Plane>(key.second))));
  return out;
}

EvalReport evaluate(const std::vector<ManifestRecord>& records, int num_structures,
                    int eval_size, const Predictor& predictor) {
  EvalReport report;
  for (const auto& rec : records) {
    GrayImage image = resize_bilinear_u8(read_png_gray(rec.image_path), eval_size, eval_size);
    GrayImage gt = resize_nearest_u8(read_png_gray(rec.mask_path), eval_size, eval_size);
    std::vector<GrayImage> pred = predictor(rec, image);
    if (static_cast<int>(pred.size()) != num_structures)
      throw ShapeMismatch("predictor returned " + std::to_string(pred.size()) +
                          " structure masks, expected " + std::to_string(num_structures));
    const std::string image_id = rec.subject_id + "/" +
                                 std::filesystem::path(rec.image_path).stem().string();
    GrayImage t(gt.h, gt.w);
    for (int s = 1; s <= num_structures; ++s) {
      const GrayImage& p = pred[static_cast<size_t>(s - 1)];
      for (size_t i = 0; i < t.pix.size(); ++i) t.pix[i] = gt.pix[i] == s;
      MetricRecord r;
      r.image_id = image_id;
      r.dataset_id = rec.dataset_id;
      r.plane = rec.plane;
      r.structure = s;
      r.dice = dice(p, t);
      r.iou = iou(p, t);
      r.hd95 = hd95(p, t);
      report.records.push_back(std::move(r));
    }
  }
  report.aggregates = aggregate_records(report.records);
  return report;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

Json aggregate_to_json(const Aggregate& a) {
  Json j = Json::object();
  j["grouping"] = a.grouping;
  j["mDice"] = a.mdice;
  j["mIoU"] = a.miou;
  if (a.mhd95) j["mHD95"] = *a.mhd95;
  else j["mHD95"] = nullptr;
  j["n"] = a.n;
  j["hd95_excluded"] = a.hd95_excluded;
  return j;
}

}  // namespace

void write_report_json(const std::string& path, const EvalReport& report, const Json& meta) {
  Json j = Json::object();
  j["meta"] = meta;
  j["records"] = Json::array();
  for (const auto& r : report.records) {
    Json rec = Json::object();
    rec["image_id"] = r.image_id;
    rec["dataset_id"] = r.dataset_id;
    rec["plane"] = plane_to_string(r.plane);
    rec["structure"] = r.structure;
    rec["dice"] = r.dice;
    rec["iou"] = r.iou;
    if (r.hd95) rec["hd95"] = *r.hd95;
    else rec["hd95"] = nullptr;
    j["records"].push_back(std::move(rec));
  }
  j["aggregates"] = Json::array();
  for (const auto& a : report.aggregates) j["aggregates"].push_back(aggregate_to_json(a));
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const std::vector<Aggregate>& aggregates) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << "grouping,mDice,mIoU,mHD95,n,hd95_excluded\n";
  for (const auto& a : aggregates) {
    os << a.grouping << ',' << format_double(a.mdice) << ',' << format_double(a.miou) << ','
       << (a.mhd95 ? format_double(*a.mhd95) : "") << ',' << a.n << ',' << a.hd95_excluded
       << '\n';
  }
}

std::string format_plane_table(const std::vector<Aggregate>& aggregates) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %6s\n", "plane", "mDice", "mIoU",
                "mHD95", "n");
  os << line;
  for (const auto& a : aggregates) {
    const std::string prefix = "plane_dataset_equal:";
    if (a.grouping.rfind(prefix, 0) != 0) continue;
    const std::string plane = a.grouping.substr(prefix.size());
    if (a.mhd95)
      std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10.4f %6ld\n", plane.c_str(),
                    a.mdice, a.miou, *a.mhd95, a.n);
    else
      std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10s %6ld\n", plane.c_str(),
                    a.mdice, a.miou, "-", a.n);
    os << line;
  }
  return os.str();
}

}  // namespace echoone
