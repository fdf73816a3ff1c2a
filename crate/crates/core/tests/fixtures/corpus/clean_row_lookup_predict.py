# expect: clean
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.neighbors import KNeighborsRegressor

cars = pd.read_csv("cars.csv")
X = cars[["hp", "weight"]]
y = cars["mpg"]
X_train, X_test, y_train, y_test = train_test_split(X, y)
knn = KNeighborsRegressor()
knn.fit(X_train, y_train)
print(knn.score(X_test, y_test))
print(knn.predict(X_test.iloc[[0]]))
print(knn.predict(X_test.iloc[3]))
