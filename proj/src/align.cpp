#include "musgen/align.hpp"

#include <algorithm>
#include <cmath>

#include "musgen/errors.hpp"

namespace musgen {

void ConditionSet::validate() const {
    if (count() == 0) throw ContractError("condition set: at least one condition must be present");
}

const std::array<MaskPattern, 7>& MaskPattern::all() {
    static const std::array<MaskPattern, 7> table = {{
        {true, false, false},
        {false, true, false},
        {false, false, true},
        {true, true, false},
        {true, false, true},
        {false, true, true},
        {true, true, true},
    }};
    return table;
}

int MaskPattern::index() const {
    const auto& table = all();
    for (size_t i = 0; i < table.size(); ++i)
        if (table[i] == *this) return static_cast<int>(i);
    return -1;
}

MaskPattern sample_mask(Rng& rng) { return MaskPattern::all()[rng.uniform_int(7)]; }

ConditionSet apply_mask(const ConditionSet& full, const MaskPattern& m) {
    if (!m.valid()) throw ContractError("apply_mask: all-false mask pattern");
    ConditionSet out;
    if (m.keep_image) out.image = full.image;
    if (m.keep_story) out.story = full.story;
    if (m.keep_caption) out.caption = full.caption;
    out.validate();
    return out;
}

AdapterStack::AdapterStack(int dim, int affine_layers, int hidden_mult, Rng& rng) : dim_(dim) {
    if (affine_layers < 1) throw ContractError("adapter stack: need at least one affine layer");
    std::vector<int> widths;
    widths.push_back(dim);
    for (int i = 0; i < affine_layers - 1; ++i) widths.push_back(dim * hidden_mult);
    widths.push_back(dim);
    image_ = Mlp("adapter.image", widths, true, rng);
    story_ = Mlp("adapter.story", widths, true, rng);
    caption_ = Mlp("adapter.caption", widths, true, rng);
}

const Mlp& AdapterStack::adapter(Modality m) const {
    switch (m) {
        case Modality::image: return image_;
        case Modality::story: return story_;
        case Modality::caption: return caption_;
        default: throw ContractError("adapter stack: no adapter for music");
    }
}

Mlp& AdapterStack::adapter(Modality m) {
    return const_cast<Mlp&>(static_cast<const AdapterStack*>(this)->adapter(m));
}

Tensor AdapterStack::forward(Modality m, const Tensor& batch) const { return adapter(m).forward(batch); }

std::vector<double> AdapterStack::apply(Modality m, const std::vector<double>& e) const {
    const Tensor out = adapter(m).forward(Tensor::from({1, dim_}, e));
    return {out.data().begin(), out.data().end()};
}

std::vector<Parameter> AdapterStack::all_params() const {
    std::vector<Parameter> out;
    append_params(out, image_.params());
    append_params(out, story_.params());
    append_params(out, caption_.params());
    return out;
}

std::vector<double> fuse_embeddings(const std::vector<const std::vector<double>*>& present) {
    if (present.empty()) throw ContractError("fuse: no conditions present");
    std::vector<double> out(present[0]->size(), 0.0);
    for (const auto* v : present) {
        if (v->size() != out.size()) throw DimensionError("fuse: embedding width mismatch");
        for (size_t i = 0; i < out.size(); ++i) out[i] += (*v)[i];
    }
    const double inv = 1.0 / static_cast<double>(present.size());
    for (auto& v : out) v *= inv;
    return out;
}

Embedding fuse(const ConditionSet& conds, const AdapterStack& adapters) {
    conds.validate();
    std::vector<std::vector<double>> mapped;
    // fixed summation order: image, story, caption
    if (conds.image) mapped.push_back(adapters.apply(Modality::image, conds.image->vector));
    if (conds.story) mapped.push_back(adapters.apply(Modality::story, conds.story->vector));
    if (conds.caption) mapped.push_back(adapters.apply(Modality::caption, conds.caption->vector));
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& v : mapped) ptrs.push_back(&v);
    Embedding e;
    e.modality = Modality::music;
    e.vector = fuse_embeddings(ptrs);
    return e;
}

Tensor fuse_rows(const Tensor& img, const Tensor& story, const Tensor& cap,
                 const std::vector<MaskPattern>& masks) {
    const auto& s = img.shape();
    if (s.size() != 2 || story.shape() != s || cap.shape() != s)
        throw DimensionError("fuse_rows: adapter outputs must share one [B x D] shape");
    const int b = s[0], d = s[1];
    if (static_cast<int>(masks.size()) != b)
        throw DimensionError("fuse_rows: mask count does not match batch size");
    for (const auto& m : masks)
        if (!m.valid()) throw ContractError("fuse_rows: all-false mask pattern");

    std::vector<double> out(static_cast<size_t>(b) * d, 0.0);
    const auto di = img.data();
    const auto ds = story.data();
    const auto dc = cap.data();
    for (int i = 0; i < b; ++i) {
        const double inv = 1.0 / masks[static_cast<size_t>(i)].count();
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            if (masks[static_cast<size_t>(i)].keep_image) acc += di[static_cast<size_t>(i) * d + j];
            if (masks[static_cast<size_t>(i)].keep_story) acc += ds[static_cast<size_t>(i) * d + j];
            if (masks[static_cast<size_t>(i)].keep_caption) acc += dc[static_cast<size_t>(i) * d + j];
            out[static_cast<size_t>(i) * d + j] = acc * inv;
        }
    }
    auto node = std::make_shared<Tensor::Node>();
    node->shape = {b, d};
    node->data = std::move(out);
    auto pi = img.node(), ps = story.node(), pc = cap.node();
    const bool need = pi->requires_grad || ps->requires_grad || pc->requires_grad;
    if (need) {
        node->requires_grad = true;
        node->parents = {pi, ps, pc};
        node->backprop = [pi, ps, pc, masks, b, d](Tensor::Node& self) {
            const double* g = self.grad_buf().data();
            for (int i = 0; i < b; ++i) {
                const double inv = 1.0 / masks[static_cast<size_t>(i)].count();
                auto push = [&](const std::shared_ptr<Tensor::Node>& p, bool kept) {
                    if (!kept || !p->requires_grad) return;
                    auto& gp = p->grad_buf();
                    for (int j = 0; j < d; ++j)
                        gp[static_cast<size_t>(i) * d + j] += g[static_cast<size_t>(i) * d + j] * inv;
                };
                push(pi, masks[static_cast<size_t>(i)].keep_image);
                push(ps, masks[static_cast<size_t>(i)].keep_story);
                push(pc, masks[static_cast<size_t>(i)].keep_caption);
            }
        };
    }
    return Tensor(node);
}

Tensor alignment_loss_graph(const ConditionSet& conds, const Embedding& target,
                            const AdapterStack& adapters) {
    conds.validate();
    if (target.modality != Modality::music)
        throw ContractError("alignment loss: target must be a music embedding");
    std::vector<Tensor> mapped;
    if (conds.image)
        mapped.push_back(adapters.forward(Modality::image, Tensor::from({1, adapters.dim()}, conds.image->vector)));
    if (conds.story)
        mapped.push_back(adapters.forward(Modality::story, Tensor::from({1, adapters.dim()}, conds.story->vector)));
    if (conds.caption)
        mapped.push_back(
            adapters.forward(Modality::caption, Tensor::from({1, adapters.dim()}, conds.caption->vector)));
    Tensor ef = mapped[0];
    for (size_t i = 1; i < mapped.size(); ++i) ef = add(ef, mapped[i]);
    ef = scale(ef, 1.0 / static_cast<double>(mapped.size()));
    const Tensor em = Tensor::from({1, static_cast<int>(target.vector.size())}, target.vector);
    return sum(square(sub(em, ef)));
}

double alignment_loss(const ConditionSet& conds, const Embedding& target, const AdapterStack& adapters) {
    return alignment_loss_graph(conds, target, adapters).value();
}

double mean_predictor_baseline(const AlignmentDataset& dataset) {
    if (dataset.empty()) throw InputError("mean_predictor_baseline: empty dataset");
    const size_t d = dataset[0].music.vector.size();
    std::vector<double> mean(d, 0.0);
    for (const auto& s : dataset)
        for (size_t j = 0; j < d; ++j) mean[j] += s.music.vector[j];
    for (auto& v : mean) v /= static_cast<double>(dataset.size());
    double acc = 0.0;
    for (const auto& s : dataset)
        for (size_t j = 0; j < d; ++j) {
            const double c = s.music.vector[j] - mean[j];
            acc += c * c;
        }
    return acc / static_cast<double>(dataset.size());
}

std::vector<double> train_alignment(const AlignmentDataset& dataset, AdapterStack& adapters,
                                    const TrainOptions& opt) {
    if (dataset.empty()) throw InputError("train_alignment: empty dataset");
    const int d = adapters.dim();
    auto params = adapters.all_params();
    AdamW optimizer(opt.optim);
    Rng rng(opt.seed);

    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> history;
    history.reserve(static_cast<size_t>(opt.epochs));
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        // Fisher-Yates with our own rng keeps the order reproducible.
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
            const int b = static_cast<int>(end - start);
            std::vector<MaskPattern> masks(static_cast<size_t>(b));
            for (auto& m : masks) m = sample_mask(rng);

            std::vector<double> xi(static_cast<size_t>(b) * d), xs(static_cast<size_t>(b) * d),
                xc(static_cast<size_t>(b) * d), xm(static_cast<size_t>(b) * d);
            for (int i = 0; i < b; ++i) {
                const auto& s = dataset[order[start + static_cast<size_t>(i)]];
                std::copy(s.image.vector.begin(), s.image.vector.end(), xi.begin() + static_cast<size_t>(i) * d);
                std::copy(s.story.vector.begin(), s.story.vector.end(), xs.begin() + static_cast<size_t>(i) * d);
                std::copy(s.caption.vector.begin(), s.caption.vector.end(),
                          xc.begin() + static_cast<size_t>(i) * d);
                std::copy(s.music.vector.begin(), s.music.vector.end(), xm.begin() + static_cast<size_t>(i) * d);
            }
            const Tensor ai = adapters.forward(Modality::image, Tensor::from({b, d}, std::move(xi)));
            const Tensor as = adapters.forward(Modality::story, Tensor::from({b, d}, std::move(xs)));
            const Tensor ac = adapters.forward(Modality::caption, Tensor::from({b, d}, std::move(xc)));
            const Tensor ef = fuse_rows(ai, as, ac, masks);
            const Tensor em = Tensor::from({b, d}, std::move(xm));
            // mse averages over B*D entries; rescale to the per-sample
            // squared-norm convention of the alignment loss
            const Tensor loss = scale(mse(ef, em), static_cast<double>(d));

            AdamW::zero_grad(params);
            backward(loss);
            optimizer.step(params);

            if (!std::isfinite(loss.value())) throw NumericError("train_alignment: non-finite loss");
            epoch_loss += loss.value() * b;
            seen += static_cast<size_t>(b);
        }
        history.push_back(epoch_loss / static_cast<double>(seen));
    }
    return history;
}

}  // namespace musgen
