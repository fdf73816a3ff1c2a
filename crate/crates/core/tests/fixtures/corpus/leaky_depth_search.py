# expect: multi_test
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.tree import DecisionTreeRegressor

bikes = pd.read_csv("bikes.csv")
X = bikes.drop(columns=["count"])
y = bikes["count"]
X_train, X_test, y_train, y_test = train_test_split(X, y)
best_depth, best_score = None, -1.0
for depth in range(2, 12):
    reg = DecisionTreeRegressor(max_depth=depth)
    reg.fit(X_train, y_train)
    s = reg.score(X_test, y_test)
    if s > best_score:
        best_depth, best_score = depth, s
print(best_depth, best_score)
