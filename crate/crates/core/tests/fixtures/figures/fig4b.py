import pandas as pd
from sklearn.feature_selection import SelectPercentile, chi2
from sklearn.linear_model import LogisticRegression, Ridge
from sklearn.model_selection import train_test_split

X_all, y_all = pd.read_csv("features.csv"), pd.read_csv("labels.csv")
X_dev, X_test_new, y_dev, y_test_new = train_test_split(X_all, y_all)
X_train, X_test, y_train, y_test = train_test_split(X_dev, y_dev)
select = SelectPercentile(chi2, percentile=50)
select.fit(X_train, y_train)
X_train = select.transform(X_train)
X_test = select.transform(X_test)

lr = LogisticRegression()
lr.fit(X_train, y_train)
lr_score = lr.score(X_test, y_test)
X, y = X_train, y_train
ridge = Ridge()
ridge.fit(X, y)
ridge_score = ridge.score(X_test, y_test)

best = lr if lr_score > ridge_score else ridge
X_test_new = select.transform(X_test_new)
best.score(X_test_new, y_test_new)
