use alloc::collections::BTreeMap;
use alloc::string::String;

use super::{TrainConfig, TreeNode};

/// Upper confidence limit on the number of errors among `n` cases of which
/// `errors` were misclassified: `n · p` where `p` solves
/// `P[Binomial(n, p) <= errors] = cf`. Counts are treated as whole cases.
pub fn pessimistic_errors(n: f64, errors: f64, cf: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let e = libm::floor(errors.max(0.0) + 1e-9);
    if e >= n {
        return n;
    }
    if e == 0.0 {
        // Closed form of the same equation: (1 - p)^n = cf.
        return n * (1.0 - libm::pow(cf, 1.0 / n));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(e, n, mid) > cf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    n * 0.5 * (lo + hi)
}

fn binomial_cdf(k: f64, n: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let ln_n_fact = libm::lgamma(n + 1.0);
    let mut sum = 0.0;
    let mut i = 0.0;
    while i <= k {
        let ln_choose = ln_n_fact - libm::lgamma(i + 1.0) - libm::lgamma(n - i + 1.0);
        sum += libm::exp(ln_choose + i * lp + (n - i) * lq);
        i += 1.0;
    }
    sum.min(1.0)
}

/// Bottom-up pessimistic-error pruning.
///
/// A subtree becomes a leaf labeled with the node's majority class when the
/// leaf's pessimistic error estimate does not exceed the summed estimates of
/// the subtree's leaves. Subtrees whose leaves all carry one label collapse
/// unconditionally since the collapse changes no prediction.
pub fn prune(root: &TreeNode, config: &TrainConfig) -> TreeNode {
    prune_node(root, config.confidence_factor).0
}

fn leaf_estimate(node: &TreeNode, cf: f64) -> f64 {
    let dist = node.distribution();
    let errors = dist.total() - dist.count(node.label());
    pessimistic_errors(dist.total(), errors, cf)
}

fn prune_node(node: &TreeNode, cf: f64) -> (TreeNode, f64) {
    let TreeNode::Internal {
        test,
        branches,
        fallback_label,
        distribution,
    } = node
    else {
        return (node.clone(), leaf_estimate(node, cf));
    };

    let mut pruned: BTreeMap<String, TreeNode> = BTreeMap::new();
    let mut subtree = 0.0;
    for (key, child) in branches {
        let (child, estimate) = prune_node(child, cf);
        subtree += estimate;
        pruned.insert(key.clone(), child);
    }

    let mut labels = pruned.values().map(|c| match c {
        TreeNode::Leaf { label, .. } => Some(label.as_str()),
        TreeNode::Internal { .. } => None,
    });
    let first = labels.next().flatten();
    let uniform = first.is_some() && labels.all(|l| l == first);
    if uniform {
        let leaf = TreeNode::Leaf {
            label: first.unwrap_or(fallback_label).into(),
            distribution: distribution.clone(),
        };
        let estimate = leaf_estimate(&leaf, cf);
        return (leaf, estimate);
    }

    let leaf = TreeNode::Leaf {
        label: fallback_label.clone(),
        distribution: distribution.clone(),
    };
    let as_leaf = leaf_estimate(&leaf, cf);
    if as_leaf <= subtree + 1e-12 {
        (leaf, as_leaf)
    } else {
        (
            TreeNode::Internal {
                test: test.clone(),
                branches: pruned,
                fallback_label: fallback_label.clone(),
                distribution: distribution.clone(),
            },
            subtree,
        )
    }
}
