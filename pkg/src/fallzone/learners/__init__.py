"""From-scratch classical learners: kNN, CART trees, random forests, SAMME boosting."""

from .boost import BoostedEnsemble, adaboost_fit, adaboost_predict, adaboost_predict_batch, adaboost_scores
from .data import ConfusionMatrix, Dataset, cm_accuracy, cross_validate, stratified_folds
from .io import dumps_model, load_model, loads_model, save_model
from .knn import KnnModel, knn_fit, knn_predict, knn_predict_batch
from .tree import (
    DecisionTree,
    ForestModel,
    forest_fit,
    forest_predict,
    forest_predict_batch,
    gini,
    tree_fit,
    tree_predict,
)

__all__ = [
    "BoostedEnsemble", "ConfusionMatrix", "Dataset", "DecisionTree", "ForestModel", "KnnModel",
    "adaboost_fit", "adaboost_predict", "adaboost_predict_batch", "adaboost_scores",
    "cm_accuracy", "cross_validate", "dumps_model", "forest_fit", "forest_predict",
    "forest_predict_batch", "gini", "knn_fit", "knn_predict", "knn_predict_batch",
    "load_model", "loads_model", "save_model", "stratified_folds", "tree_fit", "tree_predict",
]
